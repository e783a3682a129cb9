use std::collections::BTreeSet;

use capcheck::cheri::{build_core, build_micro_core, CoreConfig, MicroCap, MicroConfig, MicroOp};
use capcheck::engine::{check_interval_property, PropertySpec, SolverOptions};
use capcheck::ir::{frame_name, split_frame_name, Term, TransitionSystem, Valuation};
use capcheck::props::{
    attach_symbolic_address, canonical, prop_integrity, prop_upec_step, upec_on, Miter,
    ProtectedSet, UpecOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Miter of `ts` and the full protected set of one instance.
fn miter_of(ts: &TransitionSystem) -> (Miter, ProtectedSet) {
    let (ts, sa) = attach_symbolic_address(ts).unwrap();
    (Miter::build(&ts, &sa).unwrap(), ProtectedSet::full(&ts))
}

/// Renames framed and unframed names to the other instance.
fn rename_framed(m: &Miter, t: &Term) -> Term {
    t.substitute(&mut |n, s, r| {
        let tw = match split_frame_name(n) {
            Some((base, f)) => frame_name(&m.twin(base), f),
            None => m.twin(n),
        };
        (tw != n).then(|| Term::var(tw, s, r))
    })
}

/// Sorted (offset, canonical hash) pairs.
type Timed = Vec<(usize, u64)>;

fn fingerprint(m: &Miter, spec: &PropertySpec, rename: bool) -> (Timed, Timed) {
    let f = |t: &Term| {
        canonical(&if rename {
            rename_framed(m, t)
        } else {
            t.clone()
        })
    };
    let mut a: Vec<(usize, u64)> = spec
        .assumptions
        .iter()
        .map(|x| (x.offset, f(&x.term)))
        .collect();
    let mut c: Vec<(usize, u64)> = spec
        .commitments
        .iter()
        .map(|x| (x.offset, f(&x.term)))
        .collect();
    a.sort_unstable();
    c.sort_unstable();
    (a, c)
}

fn assert_symmetric(ts: &TransitionSystem) {
    let (m, ps) = miter_of(ts);
    let swapped = m.swap().unwrap();
    assert!(m.is_swap_of(&swapped));
    assert!(swapped.is_swap_of(&m));
    let opts = UpecOptions::default();
    let specs = [
        (
            upec_on(&m, &ps, &opts).unwrap(),
            upec_on(&swapped, &ps, &opts).unwrap(),
        ),
        (
            prop_upec_step(&m, &ps).unwrap(),
            prop_upec_step(&swapped, &ps).unwrap(),
        ),
    ];
    for (a, b) in specs {
        assert_eq!(
            fingerprint(&m, &a, true),
            fingerprint(&swapped, &b, false),
            "{}",
            a.name
        );
    }
}

#[test]
fn miter_of_core_is_symmetric() {
    assert_symmetric(&build_core(&CoreConfig::default()).unwrap());
}

#[test]
fn miter_of_buggy_core_is_symmetric() {
    let cfg = CoreConfig {
        bug_fetch_before_pcc_check: true,
        ..CoreConfig::default()
    };
    assert_symmetric(&build_core(&cfg).unwrap());
}

#[test]
fn miter_of_micro_core_is_symmetric() {
    let cfg = MicroConfig {
        explicit_memory: false,
        ..MicroConfig::default()
    };
    assert_symmetric(&build_micro_core(&cfg).unwrap());
}

#[test]
fn miter_detects_asymmetric_swap() {
    let (m, _) = miter_of(&build_core(&CoreConfig::default()).unwrap());
    let (other, _) = miter_of(
        &build_core(&CoreConfig {
            bug_capstore_second_beat: true,
            ..CoreConfig::default()
        })
        .unwrap(),
    );
    assert!(!m.is_swap_of(&other.swap().unwrap()));
}

#[test]
fn one_cycle_leakage_window_holds_on_micro() {
    let cfg = MicroConfig {
        explicit_memory: false,
        ..MicroConfig::default()
    };
    let (m, ps) = miter_of(&build_micro_core(&cfg).unwrap());
    let spec = upec_on(
        &m,
        &ps,
        &UpecOptions {
            k: 1,
            observe: None,
        },
    )
    .unwrap();
    assert!(
        check_interval_property(&m.product, &spec, &SolverOptions::default())
            .unwrap()
            .holds()
    );
}

#[test]
fn integrity_fails_for_store_into_symbolic_address() {
    let cfg = MicroConfig {
        explicit_memory: false,
        ..MicroConfig::default()
    };
    let (ts, sa) = attach_symbolic_address(&build_micro_core(&cfg).unwrap()).unwrap();
    let full = ProtectedSet::full(&ts);
    let spec = prop_integrity(&ts, &full, &sa).unwrap();
    assert!(
        check_interval_property(&ts, &spec, &SolverOptions::default())
            .unwrap()
            .holds()
    );
    let spec = prop_integrity(&ts, &ProtectedSet::new(), &sa).unwrap();
    let r = check_interval_property(&ts, &spec, &SolverOptions::default()).unwrap();
    let cex = r
        .counterexample()
        .expect("store through an unconstrained capability");
    assert_eq!(
        cex.value("instr", 0).map(|i| i >> 4),
        Some(MicroOp::Store as u64)
    );
}

/// Words excluded by every tagged capability.
fn excluded(s: &Valuation) -> BTreeSet<u64> {
    (0..8)
        .filter(|&a| {
            (0..2).all(|i| {
                let tag = s[&format!("c{i}.tag")] == 1;
                !(tag && s[&format!("c{i}.base")] <= a && a < s[&format!("c{i}.top")])
            })
        })
        .collect()
}

/// Number of random steps after which a previously excluded word became
/// reachable.
fn monotonicity_violations(cfg: &MicroConfig, seed: u64, runs: usize, steps: usize) -> usize {
    let ts = build_micro_core(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..runs {
        let mut s = ts.initial_state(|_| 0).unwrap();
        for (i, c) in cfg.caps.iter().enumerate() {
            s.insert(format!("c{i}.tag"), c.tag as u64);
            s.insert(format!("c{i}.base"), c.base as u64);
            s.insert(format!("c{i}.top"), c.top as u64);
        }
        for _ in 0..steps {
            let before = excluded(&s);
            let instr: Valuation = [("instr".to_string(), rng.gen_range(0..1u64 << 7))]
                .into_iter()
                .collect();
            s = ts.simulate_step(&s, &instr).unwrap();
            if !before.is_subset(&excluded(&s)) {
                bad += 1;
            }
        }
    }
    bad
}

fn random_micro_caps(rng: &mut ChaCha8Rng) -> [MicroCap; 2] {
    std::array::from_fn(|_| {
        let base = rng.gen_range(0..8u8);
        MicroCap {
            tag: rng.gen_bool(0.8),
            base,
            top: rng.gen_range(base..=8),
        }
    })
}

#[test]
fn excluded_words_never_become_reachable() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..50 {
        let cfg = MicroConfig {
            caps: random_micro_caps(&mut rng),
            ..MicroConfig::default()
        };
        assert_eq!(monotonicity_violations(&cfg, seed, 20, 30), 0, "{cfg:?}");
    }
}

#[test]
fn growing_set_top_makes_words_reachable() {
    let cfg = MicroConfig {
        bug_settop_grows: true,
        caps: [
            MicroCap {
                tag: true,
                base: 0,
                top: 2,
            },
            MicroCap::default(),
        ],
        ..MicroConfig::default()
    };
    assert!(monotonicity_violations(&cfg, 1, 20, 30) > 0);
    let grow = MicroOp::SetTop.encode(0, 6);
    let ts = build_micro_core(&cfg).unwrap();
    let mut s = ts.initial_state(|_| 0).unwrap();
    s.insert("c0.tag".into(), 1);
    s.insert("c0.top".into(), 2);
    let before = excluded(&s);
    let s = ts
        .simulate_step(&s, &[("instr".to_string(), grow)].into_iter().collect())
        .unwrap();
    assert!(!before.is_subset(&excluded(&s)));
}
