//! Interval properties: assumptions and commitments pinned to offsets of
//! a window that starts in a fully symbolic state.

use serde::{Deserialize, Serialize};

use crate::ir::{split_frame_name, Term, TransitionSystem};

use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyKind {
    Integrity,
    Confidentiality,
    Monotonicity,
    Upec,
    InvariantBase,
    User,
}

/// A term placed at an offset. System variables in `term` are renamed
/// into frame `offset`; names that already carry a frame (`x@j`) and free
/// symbols are left alone, so a single term may span several frames.
#[derive(Clone, Debug)]
pub struct Timed {
    pub offset: usize,
    pub term: Term,
}

#[derive(Clone, Debug)]
pub struct Commitment {
    pub id: String,
    pub offset: usize,
    pub term: Term,
}

#[derive(Clone, Debug)]
pub struct PropertySpec {
    pub name: String,
    pub kind: PropertyKind,
    pub k: usize,
    pub instances: u8,
    pub assumptions: Vec<Timed>,
    pub commitments: Vec<Commitment>,
}

impl PropertySpec {
    pub fn new(name: &str, kind: PropertyKind, k: usize) -> PropertySpec {
        PropertySpec {
            name: name.to_string(),
            kind,
            k,
            instances: 1,
            assumptions: Vec::new(),
            commitments: Vec::new(),
        }
    }

    pub fn assume(&mut self, offset: usize, term: Term) -> &mut Self {
        self.assumptions.push(Timed { offset, term });
        self
    }

    pub fn commit(&mut self, id: &str, offset: usize, term: Term) -> &mut Self {
        self.commitments.push(Commitment {
            id: id.to_string(),
            offset,
            term,
        });
        self
    }

    /// Checks offsets, sorts and that every variable is known to `ts`.
    pub fn validate(&self, ts: &TransitionSystem) -> Result<(), EngineError> {
        let bad = |msg: String| EngineError::BadSpec {
            name: self.name.clone(),
            msg,
        };
        if self.k == 0 {
            return Err(bad("window length must be at least 1".into()));
        }
        if !(1..=2).contains(&self.instances) {
            return Err(bad(format!(
                "instance count {} not in 1..=2",
                self.instances
            )));
        }
        if self.commitments.is_empty() {
            return Err(bad("no commitments".into()));
        }
        let terms = self
            .assumptions
            .iter()
            .map(|a| ("assumption", a.offset, &a.term))
            .chain(
                self.commitments
                    .iter()
                    .map(|c| ("commitment", c.offset, &c.term)),
            );
        for (what, offset, term) in terms {
            if offset > self.k {
                return Err(bad(format!(
                    "{what} at offset {offset} exceeds window {}",
                    self.k
                )));
            }
            if !term.sort().is_bool() {
                return Err(bad(format!("{what} at offset {offset} is not boolean")));
            }
            for (name, _, _) in term.support() {
                if ts.role_of(&name).is_some() {
                    continue;
                }
                match split_frame_name(&name) {
                    Some((base, i)) if ts.role_of(base).is_some() && i <= self.k => {}
                    Some((_, i)) if i > self.k => {
                        return Err(bad(format!("`{name}` lies outside the window")));
                    }
                    _ => return Err(bad(format!("`{name}` is not a variable of `{}`", ts.name))),
                }
            }
        }
        Ok(())
    }
}
