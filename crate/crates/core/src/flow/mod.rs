//! Verification flow: integrity and monotonicity with refinement of the
//! protected set, then confidentiality and the leakage check, ending in
//! a verdict and a report.

mod classify;
mod design;
mod reduction;
mod report;
mod run;

pub use classify::{
    classify_counterexample, refine_protected_set, variant_clears, ClassOverride, Classification,
};
pub use design::{Design, MicroDesign};
pub use reduction::{reduction_verdicts, ReductionVerdicts};
pub use report::{report_json, report_table};
pub use run::{run_flow, Finding, FindingKind, FlowOptions, FlowState, LogEntry, Verdict};

use thiserror::Error;

use crate::engine::EngineError;
use crate::ir::IrError;
use crate::props::PropsError;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Props(#[from] PropsError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("design: {0}")]
    Design(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}
