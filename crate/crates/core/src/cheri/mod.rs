//! Reference capability processor: capability semantics, instruction set,
//! architectural simulator and the pipelined model under verification.

mod capability;
mod config;
mod harness;
mod isa;
mod iss;
mod micro;
mod pipeline;

pub use capability::{
    check_access, check_access_term, derive_and_perm, derive_and_perm_term, derive_set_bounds,
    derive_set_bounds_term, CapTerm, Capability, Perms, FIELDS, OTYPE_SENTRY, OTYPE_UNSEALED,
    OTYPE_WIDTH,
};
pub use config::{ConfigError, CoreConfig};
pub use harness::{CycleEvents, PipelineHarness};
pub use isa::{alu, sys, DecodeError, Instruction, Kind, BEQ, BNE, IMM_MAX, IMM_MIN};
pub use iss::{iss_step, Beat, CoreState, Exception, Iss, IssError, Memory, Retired, StepOutcome};
pub use micro::{build_micro_core, MicroCap, MicroConfig, MicroOp, MICRO_ADDR_W, MICRO_WORDS};
pub use pipeline::{build_core, field_sort, register_names, BuildError};
