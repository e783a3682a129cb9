use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cheri::{build_core, build_micro_core, CoreConfig, MicroConfig, MICRO_ADDR_W};
use crate::ir::{Term, TransitionSystem};
use crate::props::{default_task_entry, state_equals_init, SymbolicAddress};

use super::FlowError;

/// A system the flow can verify, together with its defect toggles and
/// the state in which the attacker task is entered.
pub trait Design: Clone {
    fn label(&self) -> String;
    fn build(&self) -> Result<TransitionSystem, FlowError>;
    /// Names of the defect toggles that are switched on.
    fn active_toggles(&self) -> Vec<String>;
    fn without(&self, toggle: &str) -> Self;
    /// Predicate on the first state of the task.
    fn task_entry(&self, ts: &TransitionSystem, sa: &SymbolicAddress) -> Result<Term, FlowError>;
}

impl Design for CoreConfig {
    fn label(&self) -> String {
        let on: Vec<String> = self.active_toggles();
        if on.is_empty() {
            "core".into()
        } else {
            format!("core+{}", on.join("+"))
        }
    }

    fn build(&self) -> Result<TransitionSystem, FlowError> {
        build_core(self).map_err(|e| FlowError::Design(e.to_string()))
    }

    fn active_toggles(&self) -> Vec<String> {
        let mut on: Vec<String> = self
            .bugs()
            .into_iter()
            .filter(|b| b.1)
            .map(|b| b.0.to_string())
            .collect();
        if self.fetch_fault_squash {
            on.push("fetch_fault_squash".into());
        }
        on
    }

    fn without(&self, toggle: &str) -> Self {
        self.with_bug(toggle, false)
    }

    /// Every capability location is cleared except the program counter
    /// capability, which excludes the protected address.
    fn task_entry(&self, ts: &TransitionSystem, sa: &SymbolicAddress) -> Result<Term, FlowError> {
        Ok(default_task_entry(ts, sa, &["pcc"])?)
    }
}

/// The micro core with a concrete set of protected words. The symbolic
/// checks use the read-data input form of the core.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroDesign {
    pub core: MicroConfig,
    pub protected: BTreeSet<u64>,
}

impl Design for MicroDesign {
    fn label(&self) -> String {
        let mut s = String::from("micro");
        for t in self.active_toggles() {
            s.push('+');
            s.push_str(&t);
        }
        s
    }

    fn build(&self) -> Result<TransitionSystem, FlowError> {
        let cfg = MicroConfig {
            explicit_memory: false,
            ..self.core.clone()
        };
        build_micro_core(&cfg).map_err(|e| FlowError::Design(e.to_string()))
    }

    fn active_toggles(&self) -> Vec<String> {
        let mut on = Vec::new();
        if self.core.bug_off_by_one {
            on.push("bug_off_by_one".to_string());
        }
        if self.core.bug_settop_grows {
            on.push("bug_settop_grows".to_string());
        }
        on
    }

    fn without(&self, toggle: &str) -> Self {
        let mut d = self.clone();
        match toggle {
            "bug_off_by_one" => d.core.bug_off_by_one = false,
            "bug_settop_grows" => d.core.bug_settop_grows = false,
            _ => {}
        }
        d
    }

    /// The configured reset state, with the symbolic address ranging over
    /// the protected words.
    fn task_entry(&self, ts: &TransitionSystem, sa: &SymbolicAddress) -> Result<Term, FlowError> {
        let s = sa.term();
        let mut inside = Term::fals();
        for &a in &self.protected {
            if a >> MICRO_ADDR_W != 0 {
                return Err(FlowError::Design(format!(
                    "protected word {a} is outside the micro memory"
                )));
            }
            inside = inside.or(&s.equals(&Term::bv(a, s.width())));
        }
        Ok(state_equals_init(ts).and(&inside))
    }
}
