//! Security properties over a transition system: the protected-set
//! predicate, integrity, confidentiality, weak monotonicity, its
//! induction base, and the two-instance miter for leakage checking.

mod macros;
mod miter;
mod properties;
mod set;

pub use macros::{
    attach_symbolic_address, build_cheri_protected, cheri_protected_parts, env_assumption, overlap,
    ports, switch_signal, CpParts, SymbolicAddress,
};
pub use miter::{
    canonical, prop_upec_miter, prop_upec_step, prop_upec_uarch, upec_on, Miter, UpecOptions,
};
pub use properties::{
    base_spec, default_task_entry, prop_confidentiality, prop_integrity, prop_monotonicity,
    state_equals_init,
};
pub use set::{catalogue, port_locations, CapLocation, LocationKind, ProtectedSet};

use thiserror::Error;

use crate::ir::IrError;

#[derive(Debug, Error)]
pub enum PropsError {
    #[error("location `{location}` has no signal `{signal}`")]
    Unresolved { location: String, signal: String },
    #[error("location `{0}` is already in the protected set")]
    Duplicate(String),
    #[error("system has no `{0}` label")]
    MissingLabel(String),
    #[error("read data of port `{0}` feeds back into its own request")]
    Coupling(String),
    #[error("protected set: {0}")]
    Format(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}
