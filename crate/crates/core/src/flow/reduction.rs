use serde::Serialize;

use crate::engine::{check_interval_property, PropertySpec, SolverOptions, Status};
use crate::props::{
    attach_symbolic_address, base_spec, prop_confidentiality, prop_integrity, prop_monotonicity,
    prop_upec_step, upec_on, Miter, ProtectedSet, UpecOptions,
};

use super::design::Design;
use super::FlowError;

/// Results of the individual symbolic checks for one protected set, and
/// the two non-interference verdicts they imply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ReductionVerdicts {
    pub base: bool,
    pub integrity: bool,
    pub monotonicity: bool,
    pub confidentiality: bool,
    /// Leakage check; only run when confidentiality fails.
    pub leakage: Option<bool>,
}

impl ReductionVerdicts {
    /// Protected memory cannot be modified by the task.
    pub fn integrity_secure(&self) -> bool {
        self.base && self.monotonicity && self.integrity
    }

    /// Protected memory cannot influence the task.
    pub fn confidentiality_secure(&self) -> bool {
        self.base && self.monotonicity && (self.confidentiality || self.leakage == Some(true))
    }
}

fn decide(
    ts: &crate::ir::TransitionSystem,
    spec: &PropertySpec,
    opts: &SolverOptions,
) -> Result<bool, FlowError> {
    match check_interval_property(ts, spec, opts)?.status {
        Status::Holds => Ok(true),
        Status::Fails(_) => Ok(false),
        Status::Unknown(why) => Err(FlowError::Precondition(format!(
            "`{}` is undecided: {why}",
            spec.name
        ))),
    }
}

/// Runs base, integrity, monotonicity and confidentiality on `design`
/// with the protected set `ps`, and the leakage check if confidentiality
/// fails.
pub fn reduction_verdicts<D: Design>(
    design: &D,
    ps: &ProtectedSet,
    k_upec: usize,
    opts: &SolverOptions,
) -> Result<ReductionVerdicts, FlowError> {
    let (ts, sa) = attach_symbolic_address(&design.build()?)?;
    let entry = design.task_entry(&ts, &sa)?;
    let base = decide(&ts, &base_spec(&ts, ps, &sa, &entry)?, opts)?;
    let integrity = decide(&ts, &prop_integrity(&ts, ps, &sa)?, opts)?;
    let monotonicity = decide(&ts, &prop_monotonicity(&ts, ps, &sa)?, opts)?;
    let mut confidentiality = true;
    for spec in prop_confidentiality(&ts, ps, &sa)? {
        confidentiality &= decide(&ts, &spec, opts)?;
    }
    let leakage = if confidentiality {
        None
    } else {
        let m = Miter::build(&ts, &sa)?;
        let step = decide(&m.product, &prop_upec_step(&m, ps)?, opts)?;
        Some(
            step || decide(
                &m.product,
                &upec_on(
                    &m,
                    ps,
                    &UpecOptions {
                        k: k_upec,
                        observe: None,
                    },
                )?,
                opts,
            )?,
        )
    };
    Ok(ReductionVerdicts {
        base,
        integrity,
        monotonicity,
        confidentiality,
        leakage,
    })
}
