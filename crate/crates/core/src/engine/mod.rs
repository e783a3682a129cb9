//! Decision procedures: bit-blasting to CNF, SAT backends, interval
//! property checking, invariant proofs and an explicit-state oracle.

mod aig;
mod backend;
mod check;
mod cnf;
mod explicit;
mod property;
mod sat;
mod trace;

pub use aig::{Aig, AigNode, BitBlaster, Lit, Resolver, FALSE, TRUE};
pub use backend::{solve, Backend, SolveStats, SolverOptions};
pub use check::{
    bitblast, check_interval_property, eval_on_trace, evaluate_spec, prove_invariant, resimulate,
    Alert, CheckResult, CheckStats, Counterexample, InvariantResult, Status,
};
pub use cnf::{CnfEncoder, CnfError, CnfFormula};
pub use explicit::{explicit_state_check, ExplicitKind, ExplicitLimits, ExplicitResult, TracePair};
pub use property::{Commitment, PropertyKind, PropertySpec, Timed};
pub use sat::{solve_clauses, Limits, SolveOutcome, Solver, SolverStats};
pub use trace::{trace_json, trace_vcd};

use thiserror::Error;

use crate::ir::IrError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("property `{name}`: {msg}")]
    BadSpec { name: String, msg: String },
    #[error("counterexample does not replay: {0}")]
    Replay(String),
    #[error("state space limit exceeded: {0}")]
    StateSpaceLimit(String),
}
