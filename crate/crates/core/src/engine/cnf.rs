//! Clause sets in DIMACS form and Tseitin encoding of AIG cones.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use thiserror::Error;

use super::aig::{Aig, AigNode, Lit};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
    /// CNF variables of named bit-vector symbols, LSB first. Framed names
    /// (`x@i`, `x'@i`) carry the time frame and the instance.
    pub symbols: BTreeMap<String, Vec<i32>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl CnfFormula {
    pub fn new_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    pub fn add(&mut self, clause: Vec<i32>) {
        for &l in &clause {
            debug_assert!(l != 0 && l.unsigned_abs() <= self.num_vars);
        }
        self.clauses.push(clause);
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = String::with_capacity(self.clauses.len() * 16);
        let _ = writeln!(s, "p cnf {} {}", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        s
    }

    pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
        let mut f = CnfFormula::default();
        let mut declared: Option<(u32, usize)> = None;
        let mut cur = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| CnfError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p") {
                let p: Vec<&str> = rest.split_whitespace().collect();
                if p.len() != 3 || p[0] != "cnf" || declared.is_some() {
                    return Err(err("bad problem line"));
                }
                let v = p[1].parse().map_err(|_| err("bad variable count"))?;
                let c = p[2].parse().map_err(|_| err("bad clause count"))?;
                declared = Some((v, c));
                f.num_vars = v;
                continue;
            }
            if declared.is_none() {
                return Err(err("clause before problem line"));
            }
            for tok in line.split_whitespace() {
                let l: i32 = tok.parse().map_err(|_| err("bad literal"))?;
                if l == 0 {
                    f.clauses.push(std::mem::take(&mut cur));
                } else {
                    if l.unsigned_abs() > f.num_vars {
                        return Err(err("literal exceeds declared variable count"));
                    }
                    cur.push(l);
                }
            }
        }
        if !cur.is_empty() {
            f.clauses.push(cur);
        }
        match declared {
            Some((_, c)) if c == f.clauses.len() => Ok(f),
            Some((_, c)) => Err(CnfError::Parse {
                line: text.lines().count(),
                msg: format!("declared {c} clauses, found {}", f.clauses.len()),
            }),
            None => Err(CnfError::Parse {
                line: 0,
                msg: "missing problem line".into(),
            }),
        }
    }

    /// True if `model` (indexed by variable, index 0 unused) satisfies
    /// every clause.
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                model
                    .get(l.unsigned_abs() as usize)
                    .copied()
                    .unwrap_or(false)
                    == (l > 0)
            })
        })
    }
}

/// Tseitin encoder over an AIG. Variable 1 is fixed to true; other
/// variables are numbered in first-visit order from the asserted roots.
#[derive(Clone)]
pub struct CnfEncoder {
    pub cnf: CnfFormula,
    vars: HashMap<u32, i32>,
}

impl Default for CnfEncoder {
    fn default() -> Self {
        CnfEncoder::new()
    }
}

impl CnfEncoder {
    pub fn new() -> CnfEncoder {
        let mut cnf = CnfFormula::default();
        let t = cnf.new_var();
        cnf.add(vec![t]);
        CnfEncoder {
            cnf,
            vars: HashMap::new(),
        }
    }

    /// CNF variable of an AIG node, if its cone was encoded.
    pub fn var_of(&self, node: u32) -> Option<i32> {
        if node == 0 {
            return Some(1);
        }
        self.vars.get(&node).copied()
    }

    /// CNF literal for an AIG literal, encoding its cone as needed.
    pub fn lit(&mut self, aig: &Aig, l: Lit) -> i32 {
        let root = l >> 1;
        let mut stack = vec![root];
        while let Some(&n) = stack.last() {
            if n == 0 || self.vars.contains_key(&n) {
                stack.pop();
                continue;
            }
            match aig.node(n << 1) {
                AigNode::Const => unreachable!(),
                AigNode::Input => {
                    let v = self.cnf.new_var();
                    self.vars.insert(n, v);
                    stack.pop();
                }
                AigNode::And(a, b) => {
                    let (na, nb) = (a >> 1, b >> 1);
                    let ready_a = na == 0 || self.vars.contains_key(&na);
                    let ready_b = nb == 0 || self.vars.contains_key(&nb);
                    if ready_a && ready_b {
                        let la = self.signed(a);
                        let lb = self.signed(b);
                        let v = self.cnf.new_var();
                        self.cnf.add(vec![-v, la]);
                        self.cnf.add(vec![-v, lb]);
                        self.cnf.add(vec![v, -la, -lb]);
                        self.vars.insert(n, v);
                        stack.pop();
                    } else {
                        if !ready_b {
                            stack.push(nb);
                        }
                        if !ready_a {
                            stack.push(na);
                        }
                    }
                }
            }
        }
        self.signed(l)
    }

    fn signed(&self, l: Lit) -> i32 {
        // Node 0 is false, which is the negation of variable 1.
        let n = l >> 1;
        let v = if n == 0 { -1 } else { self.vars[&n] };
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    pub fn assert(&mut self, aig: &Aig, l: Lit) {
        let x = self.lit(aig, l);
        self.cnf.add(vec![x]);
    }
}
