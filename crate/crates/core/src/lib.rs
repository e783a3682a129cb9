//! Formal security checking of a small capability processor.
//!
//! The processor is emitted as a word-level transition system. Security
//! objectives are posed as interval properties over a symbolic starting
//! state and decided by bit-blasting to SAT.

pub mod cheri;
pub mod cli;
pub mod engine;
pub mod flow;
pub mod ir;
pub mod props;
