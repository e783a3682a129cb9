use std::collections::HashMap;

use super::system::TransitionSystem;
use super::term::{Term, VarRole};
use super::IrError;

pub fn frame_name(name: &str, frame: usize) -> String {
    format!("{name}@{frame}")
}

/// Inverse of [`frame_name`].
pub fn split_frame_name(name: &str) -> Option<(&str, usize)> {
    let (base, idx) = name.rsplit_once('@')?;
    Some((base, idx.parse().ok()?))
}

/// Renames the state and input variables of `t` into frame `frame`,
/// for building terms that span several frames.
pub fn at_frame(ts: &TransitionSystem, t: &Term, frame: usize) -> Term {
    t.substitute(&mut |name, sort, role| match (ts.role_of(name), role) {
        (Some(VarRole::State), VarRole::State) | (Some(VarRole::Input), VarRole::Input) => {
            Some(Term::var(frame_name(name, frame), sort, role))
        }
        _ => None,
    })
}

/// Time-frame expansion of a system over a window of `k` steps.
///
/// Every state and input gets one variable per frame, named `x@i`. Frame 0
/// states are unconstrained; for `i >= 1` the state variable `x@i` is
/// defined as the next term of `x` over frame `i - 1`. Free symbols keep
/// their names and are shared by all frames.
pub struct Unrolling<'a> {
    ts: &'a TransitionSystem,
    k: usize,
    definitions: HashMap<String, Term>,
    memo: Vec<HashMap<usize, Term>>,
}

pub fn unroll_window(ts: &TransitionSystem, k: usize) -> Result<Unrolling<'_>, IrError> {
    if k == 0 {
        return Err(IrError::ZeroWindow);
    }
    let mut u = Unrolling {
        ts,
        k,
        definitions: HashMap::new(),
        memo: vec![HashMap::new(); k + 1],
    };
    for i in 1..=k {
        for s in ts.states() {
            let d = u.at(&s.next, i - 1);
            u.definitions.insert(frame_name(&s.name, i), d);
        }
    }
    Ok(u)
}

impl<'a> Unrolling<'a> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn system(&self) -> &TransitionSystem {
        self.ts
    }

    /// Frame variable for a state or input.
    pub fn var(&self, name: &str, frame: usize) -> Option<Term> {
        let role = self.ts.role_of(name)?;
        let sort = self.ts.sort_of(name)?;
        Some(match role {
            VarRole::Free => Term::var(name, sort, role),
            _ => Term::var(frame_name(name, frame), sort, role),
        })
    }

    /// Renames the system variables of `t` into frame `frame`. Names that
    /// are not system variables, such as already framed `x@j`, are kept.
    pub fn at(&mut self, t: &Term, frame: usize) -> Term {
        let ts = self.ts;
        let memo = &mut self.memo[frame];
        t.substitute_memo(
            &mut |name, sort, role| match (ts.role_of(name), role) {
                (Some(VarRole::State), VarRole::State) | (Some(VarRole::Input), VarRole::Input) => {
                    Some(Term::var(frame_name(name, frame), sort, role))
                }
                _ => None,
            },
            memo,
        )
    }

    /// Named define of the system evaluated at a frame.
    pub fn define_at(&mut self, name: &str, frame: usize) -> Result<Term, IrError> {
        let t = self.ts.signal(name)?;
        Ok(self.at(&t, frame))
    }

    /// Definition of a framed state variable, if it has one.
    pub fn definition(&self, framed: &str) -> Option<&Term> {
        self.definitions.get(framed)
    }

    pub fn definitions(&self) -> &HashMap<String, Term> {
        &self.definitions
    }

    /// Frame constraints `x@i = next(x)@(i-1)` in deterministic order.
    pub fn constraints(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for i in 1..=self.k {
            for s in self.ts.states() {
                let n = frame_name(&s.name, i);
                let v = Term::var(&n, s.sort, VarRole::State);
                out.push(v.equals(&self.definitions[&n]));
            }
        }
        out
    }

    /// Replaces every defined frame variable by its definition, leaving a
    /// term over frame 0 states, inputs and free symbols.
    pub fn expand(&self, t: &Term) -> Term {
        let mut memo = HashMap::new();
        self.expand_memo(t, &mut memo)
    }

    pub fn expand_memo(&self, t: &Term, memo: &mut HashMap<usize, Term>) -> Term {
        let mut cache: HashMap<String, Term> = HashMap::new();
        self.expand_inner(t, memo, &mut cache)
    }

    fn expand_inner(
        &self,
        t: &Term,
        memo: &mut HashMap<usize, Term>,
        cache: &mut HashMap<String, Term>,
    ) -> Term {
        // Resolve definitions frame by frame so recursion depth stays at k.
        let mut pending: Vec<String> = t
            .support()
            .into_iter()
            .filter(|(n, _, _)| self.definitions.contains_key(n))
            .map(|(n, _, _)| n)
            .collect();
        pending.sort_by_key(|n| split_frame_name(n).map(|(_, i)| i).unwrap_or(0));
        for n in pending {
            if !cache.contains_key(&n) {
                let d = self.definitions[&n].clone();
                let e = self.expand_inner(&d, &mut HashMap::new(), cache);
                cache.insert(n, e);
            }
        }
        t.substitute_memo(&mut |name, _, _| cache.get(name).cloned(), memo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{eval_term, Sort, TsBuilder, Valuation};

    #[test]
    fn counter_constraints() {
        let mut b = TsBuilder::new("counter");
        let s = b.state("s", Sort::bv(8));
        b.next("s", s.add(&Term::bv(1, 8)));
        let ts = b.build().unwrap();
        let u = unroll_window(&ts, 2).unwrap();
        let cs: Vec<String> = u.constraints().iter().map(|c| c.to_string()).collect();
        assert_eq!(
            cs,
            vec![
                "(eq s@1 (add s@0 0x1w8))".to_string(),
                "(eq s@2 (add s@1 0x1w8))".to_string()
            ]
        );
        let e = u.expand(&Term::var("s@2", Sort::bv(8), VarRole::State));
        let v: Valuation = [("s@0".to_string(), 254)].into_iter().collect();
        assert_eq!(eval_term(&e, &v).unwrap(), 0);
    }

    #[test]
    fn zero_window_rejected() {
        let mut b = TsBuilder::new("c");
        let s = b.state("s", Sort::Bool);
        b.next("s", s.not());
        let ts = b.build().unwrap();
        assert!(unroll_window(&ts, 0).is_err());
    }
}
