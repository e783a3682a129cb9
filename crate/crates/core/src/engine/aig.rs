//! And-inverter graph with structural hashing, and bit-level lowering of
//! word-level terms into it.

use std::collections::HashMap;

use crate::ir::{Node, Op, Term};

/// Literal: `node << 1 | negated`. Node 0 is constant false.
pub type Lit = u32;

pub const FALSE: Lit = 0;
pub const TRUE: Lit = 1;

pub fn neg(l: Lit) -> Lit {
    l ^ 1
}

#[derive(Clone, Copy, Debug)]
pub enum AigNode {
    Const,
    Input,
    And(Lit, Lit),
}

#[derive(Default)]
pub struct Aig {
    nodes: Vec<AigNode>,
    strash: HashMap<(Lit, Lit), Lit>,
}

impl Aig {
    pub fn new() -> Aig {
        Aig {
            nodes: vec![AigNode::Const],
            strash: HashMap::new(),
        }
    }

    pub fn node(&self, l: Lit) -> AigNode {
        self.nodes[(l >> 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn input(&mut self) -> Lit {
        self.nodes.push(AigNode::Input);
        ((self.nodes.len() - 1) as u32) << 1
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == FALSE || a == neg(b) {
            return FALSE;
        }
        if a == TRUE || a == b {
            return b;
        }
        if let Some(&l) = self.strash.get(&(a, b)) {
            return l;
        }
        self.nodes.push(AigNode::And(a, b));
        let l = ((self.nodes.len() - 1) as u32) << 1;
        self.strash.insert((a, b), l);
        l
    }

    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        neg(self.and(neg(a), neg(b)))
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        if a == FALSE {
            return b;
        }
        if b == FALSE {
            return a;
        }
        if a == TRUE {
            return neg(b);
        }
        if b == TRUE {
            return neg(a);
        }
        let x = self.and(a, neg(b));
        let y = self.and(neg(a), b);
        self.or(x, y)
    }

    pub fn mux(&mut self, c: Lit, t: Lit, e: Lit) -> Lit {
        if c == TRUE || t == e {
            return t;
        }
        if c == FALSE {
            return e;
        }
        let x = self.and(c, t);
        let y = self.and(neg(c), e);
        self.or(x, y)
    }

    pub fn and_all(&mut self, lits: &[Lit]) -> Lit {
        lits.iter().fold(TRUE, |acc, &l| self.and(acc, l))
    }

    /// Evaluates a literal given values for input nodes.
    pub fn eval(&self, l: Lit, input: &dyn Fn(u32) -> bool, memo: &mut HashMap<u32, bool>) -> bool {
        let mut stack = vec![l >> 1];
        while let Some(&n) = stack.last() {
            if memo.contains_key(&n) {
                stack.pop();
                continue;
            }
            match self.nodes[n as usize] {
                AigNode::Const => {
                    memo.insert(n, false);
                    stack.pop();
                }
                AigNode::Input => {
                    memo.insert(n, input(n));
                    stack.pop();
                }
                AigNode::And(a, b) => {
                    let (na, nb) = (a >> 1, b >> 1);
                    match (memo.get(&na), memo.get(&nb)) {
                        (Some(&va), Some(&vb)) => {
                            let v = (va ^ (a & 1 == 1)) && (vb ^ (b & 1 == 1));
                            memo.insert(n, v);
                            stack.pop();
                        }
                        (va, vb) => {
                            if va.is_none() {
                                stack.push(na);
                            }
                            if vb.is_none() {
                                stack.push(nb);
                            }
                        }
                    }
                }
            }
        }
        memo[&(l >> 1)] ^ (l & 1 == 1)
    }
}

/// Replacement for a variable met during lowering: either another term
/// (a definition or an alias) or `None` to make it a fresh input.
pub type Resolver<'r> = dyn FnMut(&str) -> Option<Term> + 'r;

/// Lowers terms into an [`Aig`], one literal per bit, LSB first.
pub struct BitBlaster {
    pub aig: Aig,
    memo: HashMap<usize, (Term, Vec<Lit>)>,
    vars: HashMap<String, Vec<Lit>>,
    resolved: HashMap<String, Term>,
    /// Free inputs in creation order.
    inputs: Vec<String>,
}

impl Default for BitBlaster {
    fn default() -> Self {
        BitBlaster::new()
    }
}

impl BitBlaster {
    pub fn new() -> BitBlaster {
        BitBlaster {
            aig: Aig::new(),
            memo: HashMap::new(),
            vars: HashMap::new(),
            resolved: HashMap::new(),
            inputs: Vec::new(),
        }
    }

    /// Bits of a variable that became a free input.
    pub fn input_bits(&self, name: &str) -> Option<&[Lit]> {
        self.vars.get(name).map(Vec::as_slice)
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn blast_bool(&mut self, t: &Term, resolve: &mut Resolver<'_>) -> Lit {
        assert!(
            t.sort().is_bool(),
            "expected a boolean term, got {}",
            t.sort()
        );
        self.blast(t, resolve)[0]
    }

    pub fn blast(&mut self, t: &Term, resolve: &mut Resolver<'_>) -> Vec<Lit> {
        let mut stack: Vec<(Term, bool)> = vec![(t.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if self.memo.contains_key(&cur.id()) {
                continue;
            }
            let bits = match cur.node() {
                Node::Const { value, sort } => (0..sort.width())
                    .map(|i| if (value >> i) & 1 == 1 { TRUE } else { FALSE })
                    .collect(),
                Node::Var { name, sort, .. } => {
                    if let Some(b) = self.vars.get(name.as_ref()) {
                        b.clone()
                    } else {
                        let r = match self.resolved.get(name.as_ref()) {
                            Some(r) => Some(r.clone()),
                            None => {
                                let r = resolve(name);
                                if let Some(r) = &r {
                                    assert_eq!(
                                        r.sort(),
                                        *sort,
                                        "resolution of `{name}` changes its sort"
                                    );
                                    self.resolved.insert(name.to_string(), r.clone());
                                }
                                r
                            }
                        };
                        match r {
                            Some(r) => match self.memo.get(&r.id()) {
                                Some((_, b)) => {
                                    let b = b.clone();
                                    self.vars.insert(name.to_string(), b.clone());
                                    b
                                }
                                None => {
                                    stack.push((cur.clone(), true));
                                    stack.push((r, false));
                                    continue;
                                }
                            },
                            None => {
                                let b: Vec<Lit> =
                                    (0..sort.width()).map(|_| self.aig.input()).collect();
                                self.vars.insert(name.to_string(), b.clone());
                                self.inputs.push(name.to_string());
                                b
                            }
                        }
                    }
                }
                Node::App { op, args, .. } => {
                    if !expanded {
                        stack.push((cur.clone(), true));
                        for a in args {
                            if !self.memo.contains_key(&a.id()) {
                                stack.push((a.clone(), false));
                            }
                        }
                        continue;
                    }
                    let a: Vec<Vec<Lit>> =
                        args.iter().map(|x| self.memo[&x.id()].1.clone()).collect();
                    self.apply(*op, &a)
                }
            };
            self.memo.insert(cur.id(), (cur.clone(), bits));
        }
        self.memo[&t.id()].1.clone()
    }

    fn apply(&mut self, op: Op, a: &[Vec<Lit>]) -> Vec<Lit> {
        let g = &mut self.aig;
        match op {
            Op::Not => a[0].iter().map(|&l| neg(l)).collect(),
            Op::And => a[0].iter().zip(&a[1]).map(|(&x, &y)| g.and(x, y)).collect(),
            Op::Or => a[0].iter().zip(&a[1]).map(|(&x, &y)| g.or(x, y)).collect(),
            Op::Xor => a[0].iter().zip(&a[1]).map(|(&x, &y)| g.xor(x, y)).collect(),
            Op::Add => adder(g, &a[0], &a[1], FALSE),
            Op::Sub => {
                let nb: Vec<Lit> = a[1].iter().map(|&l| neg(l)).collect();
                adder(g, &a[0], &nb, TRUE)
            }
            Op::Eq => {
                let eqs: Vec<Lit> = a[0]
                    .iter()
                    .zip(&a[1])
                    .map(|(&x, &y)| neg(g.xor(x, y)))
                    .collect();
                vec![g.and_all(&eqs)]
            }
            Op::Ult => vec![less_than(g, &a[0], &a[1])],
            Op::Ule => vec![neg(less_than(g, &a[1], &a[0]))],
            Op::Concat => a[1].iter().chain(&a[0]).copied().collect(),
            Op::Extract { hi, lo } => a[0][lo as usize..=hi as usize].to_vec(),
            Op::Zext(w) => {
                let mut v = a[0].clone();
                v.resize(w as usize, FALSE);
                v
            }
            Op::Sext(w) => {
                let mut v = a[0].clone();
                let msb = *v.last().unwrap();
                v.resize(w as usize, msb);
                v
            }
            Op::Ite => {
                let c = a[0][0];
                a[1].iter()
                    .zip(&a[2])
                    .map(|(&t, &e)| g.mux(c, t, e))
                    .collect()
            }
        }
    }
}

fn adder(g: &mut Aig, x: &[Lit], y: &[Lit], cin: Lit) -> Vec<Lit> {
    let mut c = cin;
    let mut out = Vec::with_capacity(x.len());
    for (&a, &b) in x.iter().zip(y) {
        let axb = g.xor(a, b);
        out.push(g.xor(axb, c));
        let t1 = g.and(a, b);
        let t2 = g.and(axb, c);
        c = g.or(t1, t2);
    }
    out
}

/// Unsigned `x < y`, scanning from the least significant bit.
fn less_than(g: &mut Aig, x: &[Lit], y: &[Lit]) -> Lit {
    let mut lt = FALSE;
    for (&a, &b) in x.iter().zip(y) {
        // Higher bits decide; equal higher bits defer to the lower result.
        let a_lt_b = g.and(neg(a), b);
        let eq = neg(g.xor(a, b));
        let keep = g.and(eq, lt);
        lt = g.or(a_lt_b, keep);
    }
    lt
}
