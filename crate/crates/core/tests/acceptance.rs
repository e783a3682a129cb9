//! Acceptance run. Prints one pass/fail line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use capcheck::cheri::{
    build_core, build_micro_core, derive_and_perm, derive_set_bounds, Capability, CoreConfig,
    MicroCap, MicroConfig, Perms,
};
use capcheck::cli::{cmd_flow, RunConfig};
use capcheck::engine::{
    bitblast, check_interval_property, evaluate_spec, explicit_state_check, resimulate, solve,
    solve_clauses, Alert, CheckResult, ExplicitKind, ExplicitLimits, Limits, PropertySpec,
    SolveOutcome, SolverOptions,
};
use capcheck::flow::{reduction_verdicts, run_flow, FlowOptions, MicroDesign, Verdict};
use capcheck::ir::{eval_term, Sort, Term, TransitionSystem, Valuation, VarRole};
use capcheck::props::{
    attach_symbolic_address, base_spec, catalogue, default_task_entry, prop_confidentiality,
    prop_integrity, prop_monotonicity, prop_upec_step, upec_on, Miter, ProtectedSet,
    SymbolicAddress, UpecOptions,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn setup(cfg: &CoreConfig) -> (TransitionSystem, SymbolicAddress) {
    attach_symbolic_address(&build_core(cfg).unwrap()).unwrap()
}

fn check(ts: &TransitionSystem, spec: &PropertySpec) -> (CheckResult, Duration) {
    let t = Instant::now();
    let r = check_interval_property(ts, spec, &SolverOptions::default()).unwrap();
    (r, t.elapsed())
}

/// The trace replays under simulation and violates a commitment.
fn replays(ts: &TransitionSystem, spec: &PropertySpec, r: &CheckResult) -> bool {
    let Some(cex) = r.counterexample() else {
        return false;
    };
    let again = resimulate(ts, cex).unwrap();
    let same = again
        .frames
        .iter()
        .zip(&cex.frames)
        .all(|(a, b)| ts.states().iter().all(|s| a.get(&s.name) == b.get(&s.name)));
    let (assumed, violated) = evaluate_spec(ts, spec, &again).unwrap();
    same && assumed && !violated.is_empty()
}

fn expect_failure(
    label: &str,
    ts: &TransitionSystem,
    spec: &PropertySpec,
    notes: &mut Vec<String>,
) -> Result<(), String> {
    let (r, t) = check(ts, spec);
    ensure(r.fails(), || {
        format!("{label}: {} expected fail, got {}", spec.name, r.verdict())
    })?;
    ensure(t < Duration::from_secs(300), || {
        format!("{label}: {} took {t:?}", spec.name)
    })?;
    ensure(replays(ts, spec, &r), || {
        format!("{label}: trace of {} does not replay", spec.name)
    })?;
    notes.push(format!("{label}/{} {:.1}s", spec.name, t.as_secs_f64()));
    Ok(())
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    for bug in ["bug_enable_pin_polarity", "bug_capstore_second_beat"] {
        let (ts, sa) = setup(&CoreConfig::default().with_bug(bug, true));
        let spec = prop_integrity(&ts, &ProtectedSet::full(&ts), &sa).unwrap();
        expect_failure(bug, &ts, &spec, &mut notes)?;
    }
    let bug = "bug_fetch_before_pcc_check";
    let (ts, sa) = setup(&CoreConfig::default().with_bug(bug, true));
    let ps = ProtectedSet::full(&ts);
    let iport = prop_confidentiality(&ts, &ps, &sa)
        .unwrap()
        .into_iter()
        .find(|s| s.name == "confidentiality-iport")
        .unwrap();
    expect_failure(bug, &ts, &iport, &mut notes)?;
    let m = Miter::build(&ts, &sa).unwrap();
    let upec = upec_on(&m, &ps, &UpecOptions::default()).unwrap();
    expect_failure(bug, &m.product, &upec, &mut notes)?;
    let (r, _) = check(&m.product, &upec);
    let cex = r.counterexample().unwrap();
    ensure(cex.alert == Alert::LAlert, || {
        format!("expected an L-alert, got {:?}", cex.alert)
    })?;
    ensure(cex.diverged.iter().any(|d| d.starts_with("cycle@")), || {
        format!("cycle counter does not diverge: {:?}", cex.diverged)
    })?;
    Ok(notes.join(", "))
}

fn converged_set(ts: &TransitionSystem) -> ProtectedSet {
    let pcc = ProtectedSet::with_ports(ts, &["pcc"]).unwrap();
    let s = run_flow(&CoreConfig::default(), &pcc, &FlowOptions::default()).unwrap();
    s.protected_set
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (ts, sa) = setup(&CoreConfig::default());
    let ps = converged_set(&ts);
    let entry = default_task_entry(&ts, &sa, &["pcc"]).unwrap();
    let m = Miter::build(&ts, &sa).unwrap();
    let mut specs = vec![
        (ts.clone(), prop_integrity(&ts, &ps, &sa).unwrap()),
        (ts.clone(), prop_monotonicity(&ts, &ps, &sa).unwrap()),
        (ts.clone(), base_spec(&ts, &ps, &sa, &entry).unwrap()),
    ];
    for c in prop_confidentiality(&ts, &ps, &sa).unwrap() {
        specs.push((ts.clone(), c));
    }
    // Equal processor state is preserved by every step, so the k = 4
    // window holds as well.
    specs.push((m.product.clone(), prop_upec_step(&m, &ps).unwrap()));
    let mut notes = Vec::new();
    for (sys, spec) in &specs {
        let (r, t) = check(sys, spec);
        ensure(r.holds(), || format!("{} {}", spec.name, r.verdict()))?;
        notes.push(format!("{} {:.1}s", spec.name, t.as_secs_f64()));
    }
    let total = start.elapsed();
    ensure(total < Duration::from_secs(1800), || {
        format!("total {total:?}")
    })?;
    Ok(format!(
        "{} (total {:.0}s incl. convergence)",
        notes.join(", "),
        total.as_secs_f64()
    ))
}

fn criterion_3() -> Outcome {
    let (ts, _) = setup(&CoreConfig::default());
    let expected: BTreeSet<String> = catalogue(&ts).into_iter().map(|l| l.name).collect();
    ensure(expected.len() == 12, || {
        format!("catalogue has {} locations", expected.len())
    })?;
    let pcc = ProtectedSet::with_ports(&ts, &["pcc"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut reached = BTreeSet::new();
    for run in 0..10 {
        let mut order: Vec<String> = expected.iter().cloned().collect();
        order.shuffle(&mut rng);
        let opts = FlowOptions {
            candidate_order: order,
            ..FlowOptions::default()
        };
        let s = run_flow(&CoreConfig::default(), &pcc, &opts).unwrap();
        ensure(s.verdict == Verdict::Secure, || {
            format!("run {run}: verdict {:?}", s.verdict)
        })?;
        let got: BTreeSet<String> = s
            .protected_set
            .state_locations()
            .map(|l| l.name.clone())
            .collect();
        ensure(got == expected, || {
            format!("run {run}: converged to {got:?}")
        })?;
        let mono: Vec<&str> = s
            .runs_of("monotonicity")
            .map(|e| e.result.as_str())
            .collect();
        ensure(
            mono.len() >= 2
                && mono.last() == Some(&"hold")
                && mono[..mono.len() - 1].iter().all(|r| *r == "fail"),
            || format!("run {run}: monotonicity log {mono:?}"),
        )?;
        reached.insert(got);
    }
    Ok(format!(
        "10 orderings, {} distinct result, {} locations",
        reached.len(),
        expected.len()
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let depth = 12;
    let (mut holds, mut fails) = (0, 0);
    for i in 0..24 {
        let caps: [MicroCap; 2] = std::array::from_fn(|_| {
            let base = rng.gen_range(0..8u8);
            MicroCap {
                tag: rng.gen_bool(0.85),
                base,
                top: rng.gen_range(base..=8),
            }
        });
        let protected: BTreeSet<u64> = (0..8).filter(|_| rng.gen_bool(0.4)).collect();
        let core = MicroConfig {
            explicit_memory: false,
            caps,
            ..MicroConfig::default()
        };
        let d = MicroDesign {
            core: core.clone(),
            protected: protected.clone(),
        };
        let (ts, _) = attach_symbolic_address(&build_micro_core(&core).unwrap()).unwrap();
        let v =
            reduction_verdicts(&d, &ProtectedSet::full(&ts), 4, &SolverOptions::default()).unwrap();
        let explicit_ts = build_micro_core(&MicroConfig {
            explicit_memory: true,
            ..core
        })
        .unwrap();
        let lim = ExplicitLimits::default();
        let eq1 = explicit_state_check(
            &explicit_ts,
            ExplicitKind::Eq1Confidentiality,
            &protected,
            depth,
            &lim,
        )
        .unwrap()
        .holds();
        let eq2 = explicit_state_check(
            &explicit_ts,
            ExplicitKind::Eq2Integrity,
            &protected,
            depth,
            &lim,
        )
        .unwrap()
        .holds();
        ensure(eq1 == v.confidentiality_secure(), || {
            format!("config {i} {d:?}: confidentiality explicit {eq1}, symbolic {v:?}")
        })?;
        ensure(eq2 == v.integrity_secure(), || {
            format!("config {i} {d:?}: integrity explicit {eq2}, symbolic {v:?}")
        })?;
        for ok in [eq1, eq2] {
            if ok {
                holds += 1;
            } else {
                fails += 1;
            }
        }
    }
    ensure(holds > 0 && fails > 0, || {
        format!("one-sided sample: {holds} holds, {fails} fails")
    })?;
    Ok(format!(
        "24 configurations, depth {depth}, {holds} hold / {fails} fail verdicts, 0 disagreements"
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let x = Term::var("x", Sort::bv(8), VarRole::Free);
    let y = Term::var("y", Sort::bv(8), VarRole::Free);
    let vars = [x, y];
    for i in 0..200 {
        let t = common::random_bool(&mut rng, &vars, 4);
        let (r, _) = solve(
            &bitblast(std::slice::from_ref(&t)).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let exists = (0..1u64 << 16).any(|m| {
            let v: Valuation = [("x".to_string(), m & 0xff), ("y".to_string(), m >> 8)]
                .into_iter()
                .collect();
            eval_term(&t, &v).unwrap() == 1
        });
        ensure(matches!(r, SolveOutcome::Sat(_)) == exists, || {
            format!("term {i} disagrees: {t}")
        })?;
    }
    let sub = SolverOptions::external(env!("CARGO_BIN_EXE_capcheck"), vec!["dimacs-solve".into()]);
    let suite = common::regression_suite();
    for (name, ts, spec) in &suite {
        let a = check_interval_property(ts, spec, &SolverOptions::default()).unwrap();
        let b = check_interval_property(ts, spec, &sub).unwrap();
        ensure(a.verdict() == b.verdict(), || {
            format!(
                "{name}: embedded {} subprocess {}",
                a.verdict(),
                b.verdict()
            )
        })?;
    }
    let var = |p: i32, h: i32| p * 3 + h + 1;
    let mut cs: Vec<Vec<i32>> = (0..4)
        .map(|p| (0..3).map(|h| var(p, h)).collect())
        .collect();
    for h in 0..3 {
        for p in 0..4 {
            for q in p + 1..4 {
                cs.push(vec![-var(p, h), -var(q, h)]);
            }
        }
    }
    ensure(
        solve_clauses(12, &cs, Limits::default()).0 == SolveOutcome::Unsat,
        || "pigeonhole 4/3 not unsat".into(),
    )?;
    Ok(format!(
        "200/200 terms, {} suite checks agree, pigeonhole unsat",
        suite.len()
    ))
}

fn criterion_6() -> Outcome {
    let w = 6;
    let mut derivations = 0u64;
    for otype in [0u8, 1] {
        for base in 0..1u64 << w {
            for top in base..=1u64 << w {
                let c = Capability {
                    tag: true,
                    perms: Perms(0x2b),
                    base,
                    top,
                    addr: base,
                    otype,
                };
                for nb in 0..1u64 << w {
                    for nt in 0..=1u64 << w {
                        let d = derive_set_bounds(&c, nb, nt);
                        derivations += 1;
                        ensure(
                            !d.tag
                                || (otype == 0
                                    && d.base >= base
                                    && d.top <= top
                                    && c.perms.contains(d.perms)),
                            || format!("{c:?} -> {d:?}"),
                        )?;
                    }
                }
                for m in 0..64 {
                    let d = derive_and_perm(&c, Perms(m));
                    derivations += 1;
                    ensure(
                        !d.tag
                            || (otype == 0
                                && c.perms.contains(d.perms)
                                && (d.base, d.top) == (base, top)),
                        || format!("{c:?} and {m} -> {d:?}"),
                    )?;
                }
            }
        }
    }
    let mut n = 0;
    for seed in 66.. {
        n += common::lockstep(&CoreConfig::default(), 1000, 1000, seed);
        if n >= 100_000 {
            break;
        }
    }
    ensure(n >= 100_000, || format!("only {n} instructions compared"))?;
    Ok(format!(
        "{derivations} derivations at {w}-bit bounds, {n} lockstep instructions"
    ))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = "design = \"core\"\nseed = 7\n[flow]\nshuffle_candidates = true\n";
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let cfg = RunConfig::parse(text, "inline", &dir.path().join(run)).unwrap();
        let code = cmd_flow(&cfg, &mut std::io::sink()).unwrap();
        ensure(code == 0, || format!("run {run} exit {code}"))?;
        let files: Vec<Vec<u8>> = ["report.json", "report.txt", "protected_set.toml"]
            .iter()
            .map(|f| std::fs::read(cfg.output_dir.join(f)).unwrap())
            .collect();
        reports.push(files);
    }
    ensure(reports[0] == reports[1], || "reports differ".into())?;
    Ok(format!(
        "{} identical bytes of report.json",
        reports[0][0].len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("bug-analogue detection", criterion_1),
        ("clean-design proofs", criterion_2),
        ("refinement convergence", criterion_3),
        ("reduction-soundness oracle", criterion_4),
        ("engine correctness", criterion_5),
        ("capability semantics", criterion_6),
        ("reproducibility", criterion_7),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.iter().any(|o| o == &n.to_string()) {
            continue;
        }
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {n} ({name}): PASS in {secs:.1}s: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL in {secs:.1}s: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
