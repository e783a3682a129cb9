use std::io::Write;
use std::path::Path;

use crate::cheri::build_micro_core;
use crate::engine::{
    check_interval_property, explicit_state_check, trace_json, trace_vcd, CheckResult,
    ExplicitKind, ExplicitLimits, PropertySpec, Status,
};
use crate::flow::{reduction_verdicts, report_json, report_table, run_flow, Design, Verdict};
use crate::ir::{dump_system, TransitionSystem};
use crate::props::{
    attach_symbolic_address, base_spec, prop_confidentiality, prop_integrity, prop_monotonicity,
    prop_upec_step, prop_upec_uarch, upec_on, Miter, ProtectedSet, UpecOptions,
};

use super::config::{DesignKind, RunConfig};
use super::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Property names accepted by `check`.
pub const PROPERTIES: [&str; 8] = [
    "integrity",
    "confidentiality",
    "monotonicity",
    "base",
    "upec",
    "upec-step",
    "upec-uarch",
    "confidentiality-<port>",
];

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            msg: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

struct Setup {
    ts: TransitionSystem,
    sa: crate::props::SymbolicAddress,
    entry: crate::ir::Term,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    match cfg.design {
        DesignKind::Core => {
            let (ts, sa) = attach_symbolic_address(&cfg.core.build()?)?;
            let entry = cfg.core.task_entry(&ts, &sa)?;
            Ok(Setup { ts, sa, entry })
        }
        DesignKind::Micro => {
            let d = cfg.micro.design();
            let (ts, sa) = attach_symbolic_address(&d.build()?)?;
            let entry = d.task_entry(&ts, &sa)?;
            Ok(Setup { ts, sa, entry })
        }
    }
}

/// The specs behind a property name, with the system each runs on.
fn specs_for(
    cfg: &RunConfig,
    s: &Setup,
    ps: &ProtectedSet,
    name: &str,
) -> Result<Option<(TransitionSystem, Vec<PropertySpec>)>, CliError> {
    let upec = UpecOptions {
        k: cfg.k_upec,
        observe: None,
    };
    let single = |v: PropertySpec| Some((s.ts.clone(), vec![v]));
    Ok(match name {
        "integrity" => single(prop_integrity(&s.ts, ps, &s.sa)?),
        "monotonicity" => single(prop_monotonicity(&s.ts, ps, &s.sa)?),
        "base" => single(base_spec(&s.ts, ps, &s.sa, &s.entry)?),
        "confidentiality" => Some((s.ts.clone(), prop_confidentiality(&s.ts, ps, &s.sa)?)),
        "upec" | "upec-step" | "upec-uarch" => {
            let m = Miter::build(&s.ts, &s.sa)?;
            let spec = match name {
                "upec" => upec_on(&m, ps, &upec)?,
                "upec-step" => prop_upec_step(&m, ps)?,
                _ => prop_upec_uarch(&m, ps, &upec)?,
            };
            Some((m.product, vec![spec]))
        }
        _ => prop_confidentiality(&s.ts, ps, &s.sa)?
            .into_iter()
            .find(|p| p.name == name)
            .map(|p| (s.ts.clone(), vec![p])),
    })
}

/// Runs one property. Exit 0 when it holds, 1 when it fails (trace
/// files written), 2 when it is undecided or unknown.
pub fn cmd_check(cfg: &RunConfig, property: &str, out: &mut dyn Write) -> Result<i32, CliError> {
    let s = setup(cfg)?;
    let ps = match cfg.protected_set_file()? {
        Some(ps) => ps,
        None => ProtectedSet::full(&s.ts),
    };
    ps.validate(&s.ts)?;
    let Some((ts, specs)) = specs_for(cfg, &s, &ps, property)? else {
        return Err(CliError::UnknownProperty(property.to_string()));
    };
    let mut code = EXIT_OK;
    for spec in &specs {
        let r: CheckResult = check_interval_property(&ts, spec, &cfg.solver)?;
        let _ = writeln!(
            out,
            "{}: {} (conflicts {}, {} vars, {} clauses)",
            spec.name,
            r.verdict(),
            r.stats.conflicts,
            r.stats.vars,
            r.stats.clauses
        );
        match &r.status {
            Status::Holds => {}
            Status::Fails(c) => {
                let json =
                    serde_json::to_string_pretty(&trace_json(c)).expect("trace serializes") + "\n";
                let jp = cfg.output_dir.join(format!("{}.trace.json", spec.name));
                let vp = cfg.output_dir.join(format!("{}.vcd", spec.name));
                write_file(&jp, &json)?;
                write_file(&vp, &trace_vcd(c, &ts))?;
                let _ = writeln!(out, "  violated: {}", c.violated.join(", "));
                let _ = writeln!(out, "  trace: {}", jp.display());
                code = code.max(EXIT_FAIL);
            }
            Status::Unknown(why) => {
                let _ = writeln!(out, "  {why}");
                code = EXIT_ERROR;
            }
        }
    }
    Ok(code)
}

/// Runs the verification flow and writes the report. Exit 0 = secure,
/// 1 = vulnerable, 2 = inconclusive.
pub fn cmd_flow(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let s = setup(cfg)?;
    let initial = match cfg.protected_set_file()? {
        Some(ps) => ps,
        None => {
            let initial = cfg.initial_locations();
            let names: Vec<&str> = initial.iter().map(String::as_str).collect();
            ProtectedSet::with_ports(&s.ts, &names)?
        }
    };
    let opts = cfg.flow_options(&s.ts);
    let state = match cfg.design {
        DesignKind::Core => run_flow(&cfg.core, &initial, &opts)?,
        DesignKind::Micro => run_flow(&cfg.micro.design(), &initial, &opts)?,
    };
    let table = report_table(&state);
    write_file(&cfg.output_dir.join("report.json"), &report_json(&state))?;
    write_file(&cfg.output_dir.join("report.txt"), &table)?;
    write_file(
        &cfg.output_dir.join("protected_set.toml"),
        &state.protected_set.to_toml(),
    )?;
    let _ = write!(out, "{table}");
    Ok(match state.verdict {
        Verdict::Secure => EXIT_OK,
        Verdict::Vulnerable => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_ERROR,
    })
}

/// Explicit-state non-interference check of the micro core, compared
/// with the symbolic verdicts. Exit 0 when both agree on both checks.
pub fn cmd_oracle(cfg: &RunConfig, depth: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let explicit_ts = match cfg.design {
        DesignKind::Micro => build_micro_core(&cfg.micro.core(true))?,
        DesignKind::Core => cfg.core.build()?,
    };
    let limits = ExplicitLimits::default();
    let eq1 = explicit_state_check(
        &explicit_ts,
        ExplicitKind::Eq1Confidentiality,
        &cfg.micro.protected,
        depth,
        &limits,
    )?;
    let eq2 = explicit_state_check(
        &explicit_ts,
        ExplicitKind::Eq2Integrity,
        &cfg.micro.protected,
        depth,
        &limits,
    )?;
    let d = cfg.micro.design();
    let (ts, _) = attach_symbolic_address(&d.build()?)?;
    let ps = match cfg.protected_set_file()? {
        Some(ps) => ps,
        None => ProtectedSet::full(&ts),
    };
    let v = reduction_verdicts(&d, &ps, cfg.k_upec, &cfg.solver)?;
    let word = |b: bool| if b { "holds" } else { "fails" };
    let rows = [
        ("confidentiality", eq1.holds(), v.confidentiality_secure()),
        ("integrity", eq2.holds(), v.integrity_secure()),
    ];
    let mut agree = true;
    for (what, e, sym) in rows {
        let _ = writeln!(
            out,
            "{what}: explicit {} (depth {depth}), symbolic {}{}",
            word(e),
            word(sym),
            if e == sym { "" } else { "  DISAGREE" }
        );
        agree &= e == sym;
    }
    let _ = writeln!(
        out,
        "symbolic checks: base {}, integrity {}, monotonicity {}, confidentiality {}{}",
        word(v.base),
        word(v.integrity),
        word(v.monotonicity),
        word(v.confidentiality),
        v.leakage
            .map(|l| format!(", leakage {}", word(l)))
            .unwrap_or_default()
    );
    Ok(if agree { EXIT_OK } else { EXIT_FAIL })
}

/// Text form of the configured system.
pub fn cmd_dump_core(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let ts = match cfg.design {
        DesignKind::Core => cfg.core.build()?,
        DesignKind::Micro => build_micro_core(&cfg.micro.core(true))?,
    };
    let _ = write!(out, "{}", dump_system(&ts));
    Ok(EXIT_OK)
}
