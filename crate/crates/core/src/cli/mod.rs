//! Command-line front end: configuration file, commands and exit codes.

mod commands;
mod config;
mod dimacs;

pub use commands::{
    cmd_check, cmd_dump_core, cmd_flow, cmd_oracle, EXIT_ERROR, EXIT_FAIL, EXIT_OK, PROPERTIES,
};
pub use config::{DesignKind, FlowSection, MicroSection, RunConfig};
pub use dimacs::solve_dimacs_file;

use thiserror::Error;

use crate::cheri::BuildError;
use crate::engine::EngineError;
use crate::flow::FlowError;
use crate::ir::IrError;
use crate::props::PropsError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Props(#[from] PropsError),
    #[error(transparent)]
    Ir(#[from] IrError),
}
