//! Word-level intermediate representation for finite state machines.

mod eval;
mod system;
mod term;
mod text;
mod unroll;

pub use eval::{eval_term, Evaluator, Valuation};
pub use system::{Simulator, StateVar, TransitionSystem, TsBuilder, Var};
pub use term::{Node, Op, Sort, Term, VarRole, MAX_WIDTH};
pub use text::{dump_system, load_system};
pub use unroll::{at_frame, frame_name, split_frame_name, unroll_window, Unrolling};

pub(crate) use term::mask;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("bit-vector width {0} outside 1..=64")]
    BadWidth(u32),
    #[error("operator {op} cannot be applied to operands of sort ({})", operands.join(", "))]
    SortMismatch { op: String, operands: Vec<String> },
    #[error("no value for variable `{0}`")]
    MissingVariable(String),
    #[error("value {value:#x} does not fit variable `{name}` of sort {sort}")]
    ValueTooWide {
        name: String,
        value: u64,
        sort: Sort,
    },
    #[error("`{0}` declared twice")]
    Duplicate(String),
    #[error("`{name}` references undeclared variable `{var}`")]
    Undeclared { name: String, var: String },
    #[error("state variable `{0}` has no next term")]
    MissingNext(String),
    #[error("sort of `{name}` is {expected}, term has sort {found}")]
    WrongSort {
        name: String,
        expected: Sort,
        found: Sort,
    },
    #[error("label `{label}` names unknown item `{name}`")]
    UnknownLabelTarget { label: String, name: String },
    #[error("labels P_arch and P_uarch must partition P: {0}")]
    BadPartition(String),
    #[error("unknown define `{0}`")]
    UnknownDefine(String),
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
