use std::collections::{BTreeMap, HashMap};

use super::term::{apply_op, Node, Sort, Term};
use super::IrError;

/// Concrete assignment from variable names to values. Ordered so that
/// serialized traces are stable.
pub type Valuation = BTreeMap<String, u64>;

/// Evaluates `t` under `v`.
pub fn eval_term(t: &Term, v: &Valuation) -> Result<u64, IrError> {
    Evaluator::new(v).eval(t)
}

/// Memoizing evaluator. Reuse one instance to evaluate many terms that
/// share structure under the same valuation.
pub struct Evaluator<'a> {
    vals: &'a Valuation,
    memo: HashMap<usize, u64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(vals: &'a Valuation) -> Self {
        Evaluator {
            vals,
            memo: HashMap::new(),
        }
    }

    pub fn eval(&mut self, t: &Term) -> Result<u64, IrError> {
        if let Some(v) = self.memo.get(&t.id()) {
            return Ok(*v);
        }
        let mut stack: Vec<(Term, bool)> = vec![(t.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if self.memo.contains_key(&cur.id()) {
                continue;
            }
            let value = match cur.node() {
                Node::Const { value, .. } => *value,
                Node::Var { name, sort, .. } => {
                    let v = *self
                        .vals
                        .get(name.as_ref())
                        .ok_or_else(|| IrError::MissingVariable(name.to_string()))?;
                    if v & !sort.mask() != 0 {
                        return Err(IrError::ValueTooWide {
                            name: name.to_string(),
                            value: v,
                            sort: *sort,
                        });
                    }
                    v
                }
                Node::App { op, args, sort } => {
                    if !expanded {
                        stack.push((cur.clone(), true));
                        for a in args {
                            if !self.memo.contains_key(&a.id()) {
                                stack.push((a.clone(), false));
                            }
                        }
                        continue;
                    }
                    let sorts: Vec<Sort> = args.iter().map(Term::sort).collect();
                    let vals: Vec<u64> = args.iter().map(|a| self.memo[&a.id()]).collect();
                    apply_op(*op, *sort, &sorts, &vals)
                }
            };
            self.memo.insert(cur.id(), value);
        }
        Ok(self.memo[&t.id()])
    }

    pub fn eval_bool(&mut self, t: &Term) -> Result<bool, IrError> {
        Ok(self.eval(t)? != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::VarRole;

    #[test]
    fn wraparound_addition() {
        let t = Term::bv(7, 8).add(&Term::bv(250, 8));
        assert_eq!(eval_term(&t, &Valuation::new()).unwrap(), 1);
    }

    #[test]
    fn ite_selects_then_branch() {
        let x = Term::var("x", Sort::bv(4), VarRole::State);
        let a = Term::var("a", Sort::bv(4), VarRole::State);
        let b = Term::var("b", Sort::bv(4), VarRole::State);
        let t = Term::ite(&x.equals(&Term::bv(0, 4)), &a, &b);
        let v: Valuation = [("x", 0), ("a", 5), ("b", 9)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(eval_term(&t, &v).unwrap(), 5);
    }

    #[test]
    fn missing_variable_is_reported() {
        let x = Term::var("x", Sort::bv(4), VarRole::Input);
        let err = eval_term(&x.add(&Term::bv(1, 4)), &Valuation::new()).unwrap_err();
        assert_eq!(err, IrError::MissingVariable("x".into()));
    }

    #[test]
    fn oversized_value_rejected() {
        let x = Term::var("x", Sort::bv(4), VarRole::Input);
        let v: Valuation = [("x".to_string(), 16)].into_iter().collect();
        assert!(matches!(
            eval_term(&x, &v),
            Err(IrError::ValueTooWide { .. })
        ));
    }
}
