//! Word-level expression DAG.
//!
//! Terms are reference counted and immutable. Construction checks operand
//! sorts and folds constant subterms, so a term that exists is well sorted.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::IrError;

/// Bit-vector or boolean sort. Bit-vectors are limited to 64 bits because
/// concrete values are carried in a `u64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    BitVec(u32),
}

pub const MAX_WIDTH: u32 = 64;

impl Sort {
    pub fn bv(width: u32) -> Sort {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "bit-vector width {width} out of range"
        );
        Sort::BitVec(width)
    }

    pub fn width(self) -> u32 {
        match self {
            Sort::Bool => 1,
            Sort::BitVec(w) => w,
        }
    }

    pub fn is_bool(self) -> bool {
        matches!(self, Sort::Bool)
    }

    pub fn mask(self) -> u64 {
        mask(self.width())
    }

    pub fn validate(self) -> Result<(), IrError> {
        match self {
            Sort::BitVec(w) if w == 0 || w > MAX_WIDTH => Err(IrError::BadWidth(w)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "bool"),
            Sort::BitVec(w) => write!(f, "bv{w}"),
        }
    }
}

pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Role of a variable. Free symbols are never driven by a transition
/// relation; the solver may pick any value for them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRole {
    State,
    Input,
    Free,
}

impl VarRole {
    pub fn keyword(self) -> &'static str {
        match self {
            VarRole::State => "state",
            VarRole::Input => "input",
            VarRole::Free => "free",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Not,
    And,
    Or,
    Xor,
    Add,
    Sub,
    Eq,
    Ult,
    Ule,
    Concat,
    Extract { hi: u32, lo: u32 },
    Zext(u32),
    Sext(u32),
    Ite,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Not | Op::Extract { .. } | Op::Zext(_) | Op::Sext(_) => 1,
            Op::Ite => 3,
            _ => 2,
        }
    }

    pub fn mnemonic(self) -> String {
        match self {
            Op::Not => "not".into(),
            Op::And => "and".into(),
            Op::Or => "or".into(),
            Op::Xor => "xor".into(),
            Op::Add => "add".into(),
            Op::Sub => "sub".into(),
            Op::Eq => "eq".into(),
            Op::Ult => "ult".into(),
            Op::Ule => "ule".into(),
            Op::Concat => "concat".into(),
            Op::Extract { hi, lo } => format!("extract:{hi}:{lo}"),
            Op::Zext(w) => format!("zext:{w}"),
            Op::Sext(w) => format!("sext:{w}"),
            Op::Ite => "ite".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Op> {
        let mut parts = s.split(':');
        let head = parts.next()?;
        let mut num = || parts.next().and_then(|p| p.parse::<u32>().ok());
        Some(match head {
            "not" => Op::Not,
            "and" => Op::And,
            "or" => Op::Or,
            "xor" => Op::Xor,
            "add" => Op::Add,
            "sub" => Op::Sub,
            "eq" => Op::Eq,
            "ult" => Op::Ult,
            "ule" => Op::Ule,
            "concat" => Op::Concat,
            "extract" => {
                let hi = num()?;
                let lo = num()?;
                Op::Extract { hi, lo }
            }
            "zext" => Op::Zext(num()?),
            "sext" => Op::Sext(num()?),
            "ite" => Op::Ite,
            _ => return None,
        })
    }
}

#[derive(Debug)]
pub enum Node {
    Const {
        value: u64,
        sort: Sort,
    },
    Var {
        name: Arc<str>,
        sort: Sort,
        role: VarRole,
    },
    App {
        op: Op,
        args: Vec<Term>,
        sort: Sort,
    },
}

struct Shared {
    serial: usize,
    node: Node,
}

static SERIAL: AtomicUsize = AtomicUsize::new(0);

impl Shared {
    fn new(node: Node) -> Arc<Shared> {
        Arc::new(Shared {
            serial: SERIAL.fetch_add(1, Ordering::Relaxed),
            node,
        })
    }
}

#[derive(Clone)]
pub struct Term(Arc<Shared>);

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const { value, sort } => match sort {
                Sort::Bool => write!(f, "{}", *value != 0),
                Sort::BitVec(w) => write!(f, "{value:#x}w{w}"),
            },
            Node::Var { name, .. } => write!(f, "{name}"),
            Node::App { op, args, .. } => {
                write!(f, "({}", op.mnemonic())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Sort rule for an application; `None` when operands are ill sorted.
fn result_sort(op: Op, args: &[Sort]) -> Option<Sort> {
    if args.len() != op.arity() {
        return None;
    }
    let bv = |s: Sort| matches!(s, Sort::BitVec(_));
    match op {
        Op::Not => Some(args[0]),
        Op::And | Op::Or | Op::Xor => (args[0] == args[1]).then_some(args[0]),
        Op::Add | Op::Sub => (args[0] == args[1] && bv(args[0])).then_some(args[0]),
        Op::Eq => (args[0] == args[1]).then_some(Sort::Bool),
        Op::Ult | Op::Ule => (args[0] == args[1] && bv(args[0])).then_some(Sort::Bool),
        Op::Concat => {
            let w = args[0].width() + args[1].width();
            (bv(args[0]) && bv(args[1]) && w <= MAX_WIDTH).then_some(Sort::BitVec(w))
        }
        Op::Extract { hi, lo } => {
            (bv(args[0]) && lo <= hi && hi < args[0].width()).then_some(Sort::BitVec(hi - lo + 1))
        }
        Op::Zext(w) | Op::Sext(w) => {
            (bv(args[0]) && w >= args[0].width() && w <= MAX_WIDTH).then_some(Sort::BitVec(w))
        }
        Op::Ite => (args[0] == Sort::Bool && args[1] == args[2]).then_some(args[1]),
    }
}

/// Concrete semantics of one operator on already-evaluated operands.
/// Shared by the term evaluator and the compiled simulator.
pub(crate) fn apply_op(op: Op, sort: Sort, arg_sorts: &[Sort], vals: &[u64]) -> u64 {
    let m = sort.mask();
    match op {
        Op::Not => !vals[0] & m,
        Op::And => vals[0] & vals[1],
        Op::Or => vals[0] | vals[1],
        Op::Xor => vals[0] ^ vals[1],
        Op::Add => vals[0].wrapping_add(vals[1]) & m,
        Op::Sub => vals[0].wrapping_sub(vals[1]) & m,
        Op::Eq => (vals[0] == vals[1]) as u64,
        Op::Ult => (vals[0] < vals[1]) as u64,
        Op::Ule => (vals[0] <= vals[1]) as u64,
        Op::Concat => {
            let lw = arg_sorts[1].width();
            if lw >= 64 {
                vals[1]
            } else {
                ((vals[0] << lw) | vals[1]) & m
            }
        }
        Op::Extract { lo, .. } => (vals[0] >> lo) & m,
        Op::Zext(_) => vals[0],
        Op::Sext(_) => {
            let w = arg_sorts[0].width();
            let v = vals[0];
            if w < 64 && (v >> (w - 1)) & 1 == 1 {
                (v | !mask(w)) & m
            } else {
                v
            }
        }
        Op::Ite => {
            if vals[0] != 0 {
                vals[1]
            } else {
                vals[2]
            }
        }
    }
}

impl Term {
    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Identity of the shared node. Never reused, even after the node is
    /// dropped.
    pub fn id(&self) -> usize {
        self.0.serial
    }

    pub fn sort(&self) -> Sort {
        match self.node() {
            Node::Const { sort, .. } | Node::Var { sort, .. } | Node::App { sort, .. } => *sort,
        }
    }

    pub fn width(&self) -> u32 {
        self.sort().width()
    }

    pub fn constant(value: u64, sort: Sort) -> Term {
        Term(Shared::new(Node::Const {
            value: value & sort.mask(),
            sort,
        }))
    }

    pub fn bv(value: u64, width: u32) -> Term {
        Term::constant(value, Sort::bv(width))
    }

    pub fn bool(b: bool) -> Term {
        Term::constant(b as u64, Sort::Bool)
    }

    pub fn tru() -> Term {
        Term::bool(true)
    }

    pub fn fals() -> Term {
        Term::bool(false)
    }

    pub fn var(name: impl AsRef<str>, sort: Sort, role: VarRole) -> Term {
        Term(Shared::new(Node::Var {
            name: Arc::from(name.as_ref()),
            sort,
            role,
        }))
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.node() {
            Node::Const { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<(&str, Sort, VarRole)> {
        match self.node() {
            Node::Var { name, sort, role } => Some((name, *sort, *role)),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.sort().is_bool() && self.as_const() == Some(1)
    }

    pub fn is_false(&self) -> bool {
        self.sort().is_bool() && self.as_const() == Some(0)
    }

    /// Checked application. Folds constants and a few identities.
    pub fn apply(op: Op, args: Vec<Term>) -> Result<Term, IrError> {
        let sorts: Vec<Sort> = args.iter().map(Term::sort).collect();
        let sort = result_sort(op, &sorts).ok_or_else(|| IrError::SortMismatch {
            op: op.mnemonic(),
            operands: sorts.iter().map(|s| s.to_string()).collect(),
        })?;
        if let Some(vals) = args.iter().map(Term::as_const).collect::<Option<Vec<_>>>() {
            return Ok(Term::constant(apply_op(op, sort, &sorts, &vals), sort));
        }
        if let Some(t) = simplify(op, &args, sort) {
            return Ok(t);
        }
        Ok(Term(Shared::new(Node::App { op, args, sort })))
    }

    fn app(op: Op, args: Vec<Term>) -> Term {
        match Term::apply(op, args) {
            Ok(t) => t,
            Err(e) => panic!("ill-sorted term construction: {e}"),
        }
    }

    pub fn not(&self) -> Term {
        Term::app(Op::Not, vec![self.clone()])
    }
    pub fn and(&self, o: &Term) -> Term {
        Term::app(Op::And, vec![self.clone(), o.clone()])
    }
    pub fn or(&self, o: &Term) -> Term {
        Term::app(Op::Or, vec![self.clone(), o.clone()])
    }
    pub fn xor(&self, o: &Term) -> Term {
        Term::app(Op::Xor, vec![self.clone(), o.clone()])
    }
    pub fn implies(&self, o: &Term) -> Term {
        self.not().or(o)
    }
    pub fn add(&self, o: &Term) -> Term {
        Term::app(Op::Add, vec![self.clone(), o.clone()])
    }
    pub fn sub(&self, o: &Term) -> Term {
        Term::app(Op::Sub, vec![self.clone(), o.clone()])
    }
    pub fn equals(&self, o: &Term) -> Term {
        Term::app(Op::Eq, vec![self.clone(), o.clone()])
    }
    pub fn not_equals(&self, o: &Term) -> Term {
        self.equals(o).not()
    }
    pub fn ult(&self, o: &Term) -> Term {
        Term::app(Op::Ult, vec![self.clone(), o.clone()])
    }
    pub fn ule(&self, o: &Term) -> Term {
        Term::app(Op::Ule, vec![self.clone(), o.clone()])
    }
    pub fn ugt(&self, o: &Term) -> Term {
        o.ult(self)
    }
    pub fn uge(&self, o: &Term) -> Term {
        o.ule(self)
    }
    /// `self` becomes the high part.
    pub fn concat(&self, low: &Term) -> Term {
        Term::app(Op::Concat, vec![self.clone(), low.clone()])
    }
    pub fn extract(&self, hi: u32, lo: u32) -> Term {
        Term::app(Op::Extract { hi, lo }, vec![self.clone()])
    }
    pub fn bit(&self, i: u32) -> Term {
        self.extract(i, i).equals(&Term::bv(1, 1))
    }
    pub fn zext(&self, width: u32) -> Term {
        Term::app(Op::Zext(width), vec![self.clone()])
    }
    pub fn sext(&self, width: u32) -> Term {
        Term::app(Op::Sext(width), vec![self.clone()])
    }
    /// Truncate or zero-extend to `width`.
    pub fn resize(&self, width: u32) -> Term {
        let w = self.width();
        if width < w {
            self.extract(width - 1, 0)
        } else {
            self.zext(width)
        }
    }
    /// Boolean to a one-bit vector.
    pub fn to_bv1(&self) -> Term {
        Term::ite(self, &Term::bv(1, 1), &Term::bv(0, 1))
    }
    pub fn ite(c: &Term, t: &Term, e: &Term) -> Term {
        Term::app(Op::Ite, vec![c.clone(), t.clone(), e.clone()])
    }

    pub fn and_all<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Term {
        terms.into_iter().fold(Term::tru(), |acc, t| acc.and(t))
    }

    pub fn or_all<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Term {
        terms.into_iter().fold(Term::fals(), |acc, t| acc.or(t))
    }

    /// Operands of an application (empty for leaves).
    pub fn args(&self) -> &[Term] {
        match self.node() {
            Node::App { args, .. } => args,
            _ => &[],
        }
    }

    pub fn op(&self) -> Option<Op> {
        match self.node() {
            Node::App { op, .. } => Some(*op),
            _ => None,
        }
    }

    /// Splits nested conjunctions of a boolean term into its conjuncts.
    pub fn conjuncts(&self) -> Vec<Term> {
        let mut out = Vec::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if t.sort().is_bool() && t.op() == Some(Op::And) {
                stack.push(t.args()[1].clone());
                stack.push(t.args()[0].clone());
            } else if !t.is_true() {
                out.push(t);
            }
        }
        out
    }

    /// Rebuilds the DAG bottom-up, replacing variables for which `f`
    /// returns a replacement. Shared nodes are visited once.
    pub fn substitute(&self, f: &mut dyn FnMut(&str, Sort, VarRole) -> Option<Term>) -> Term {
        let mut memo = HashMap::new();
        self.substitute_memo(f, &mut memo)
    }

    pub fn substitute_memo(
        &self,
        f: &mut dyn FnMut(&str, Sort, VarRole) -> Option<Term>,
        memo: &mut HashMap<usize, Term>,
    ) -> Term {
        // Iterative post-order so deep unrollings cannot blow the stack.
        let mut stack: Vec<(Term, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if memo.contains_key(&t.id()) {
                continue;
            }
            match t.node() {
                Node::Const { .. } => {
                    memo.insert(t.id(), t.clone());
                }
                Node::Var { name, sort, role } => {
                    let r = f(name, *sort, *role).unwrap_or_else(|| t.clone());
                    assert_eq!(r.sort(), *sort, "substitution changes sort of {name}");
                    memo.insert(t.id(), r);
                }
                Node::App { op, args, .. } => {
                    if expanded {
                        let new_args: Vec<Term> =
                            args.iter().map(|a| memo[&a.id()].clone()).collect();
                        let same = new_args.iter().zip(args).all(|(a, b)| a.id() == b.id());
                        let r = if same {
                            t.clone()
                        } else {
                            Term::app(*op, new_args)
                        };
                        memo.insert(t.id(), r);
                    } else {
                        stack.push((t.clone(), true));
                        for a in args {
                            if !memo.contains_key(&a.id()) {
                                stack.push((a.clone(), false));
                            }
                        }
                    }
                }
            }
        }
        memo[&self.id()].clone()
    }

    /// Names, sorts and roles of all variables reachable from this term,
    /// in first-visit order.
    pub fn support(&self) -> Vec<(String, Sort, VarRole)> {
        let mut seen = std::collections::HashSet::new();
        let mut names = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            match t.node() {
                Node::Var { name, sort, role } => {
                    if names.insert(name.to_string()) {
                        out.push((name.to_string(), *sort, *role));
                    }
                }
                Node::App { args, .. } => {
                    for a in args.iter().rev() {
                        stack.push(a.clone());
                    }
                }
                Node::Const { .. } => {}
            }
        }
        out
    }

    /// Number of distinct DAG nodes.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if seen.insert(t.id()) {
                stack.extend(t.args().iter().cloned());
            }
        }
        seen.len()
    }

    /// Structural equality; shared subterms are compared once.
    pub fn structurally_eq(&self, other: &Term) -> bool {
        let mut memo = std::collections::HashSet::new();
        struct_eq(self, other, &mut memo)
    }
}

fn struct_eq(a: &Term, b: &Term, memo: &mut std::collections::HashSet<(usize, usize)>) -> bool {
    if a.id() == b.id() || memo.contains(&(a.id(), b.id())) {
        return true;
    }
    let eq = match (a.node(), b.node()) {
        (
            Node::Const {
                value: v1,
                sort: s1,
            },
            Node::Const {
                value: v2,
                sort: s2,
            },
        ) => v1 == v2 && s1 == s2,
        (
            Node::Var {
                name: n1,
                sort: s1,
                role: r1,
            },
            Node::Var {
                name: n2,
                sort: s2,
                role: r2,
            },
        ) => n1 == n2 && s1 == s2 && r1 == r2,
        (
            Node::App {
                op: o1, args: a1, ..
            },
            Node::App {
                op: o2, args: a2, ..
            },
        ) => o1 == o2 && a1.iter().zip(a2).all(|(x, y)| struct_eq(x, y, memo)),
        _ => false,
    };
    if eq {
        memo.insert((a.id(), b.id()));
    }
    eq
}

/// Local rewrites that keep unrolled terms small. Only applied when at
/// least one operand is non-constant.
fn simplify(op: Op, args: &[Term], sort: Sort) -> Option<Term> {
    let c = |i: usize| args[i].as_const();
    let ones = sort.mask();
    match op {
        Op::And => {
            for (i, j) in [(0, 1), (1, 0)] {
                match c(i) {
                    Some(0) => return Some(Term::constant(0, sort)),
                    Some(v) if v == ones => return Some(args[j].clone()),
                    _ => {}
                }
            }
            if args[0].id() == args[1].id() {
                return Some(args[0].clone());
            }
            None
        }
        Op::Or => {
            for (i, j) in [(0, 1), (1, 0)] {
                match c(i) {
                    Some(0) => return Some(args[j].clone()),
                    Some(v) if v == ones => return Some(Term::constant(ones, sort)),
                    _ => {}
                }
            }
            if args[0].id() == args[1].id() {
                return Some(args[0].clone());
            }
            None
        }
        Op::Xor => {
            for (i, j) in [(0, 1), (1, 0)] {
                if c(i) == Some(0) {
                    return Some(args[j].clone());
                }
            }
            if args[0].id() == args[1].id() {
                return Some(Term::constant(0, sort));
            }
            None
        }
        Op::Not => {
            if args[0].op() == Some(Op::Not) {
                return Some(args[0].args()[0].clone());
            }
            None
        }
        Op::Add | Op::Sub => {
            if c(1) == Some(0) {
                return Some(args[0].clone());
            }
            if op == Op::Add && c(0) == Some(0) {
                return Some(args[1].clone());
            }
            None
        }
        Op::Eq => {
            if args[0].id() == args[1].id() {
                return Some(Term::tru());
            }
            if args[0].sort().is_bool() {
                for (i, j) in [(0, 1), (1, 0)] {
                    match c(i) {
                        Some(1) => return Some(args[j].clone()),
                        Some(0) => return Some(args[j].not()),
                        _ => {}
                    }
                }
            }
            None
        }
        Op::Ule => {
            if args[0].id() == args[1].id() || c(0) == Some(0) {
                return Some(Term::tru());
            }
            None
        }
        Op::Ult => {
            if args[0].id() == args[1].id() || c(1) == Some(0) {
                return Some(Term::fals());
            }
            None
        }
        Op::Ite => {
            match c(0) {
                Some(1) => return Some(args[1].clone()),
                Some(0) => return Some(args[2].clone()),
                _ => {}
            }
            if args[1].id() == args[2].id() {
                return Some(args[1].clone());
            }
            if sort.is_bool() {
                match (c(1), c(2)) {
                    (Some(1), Some(0)) => return Some(args[0].clone()),
                    (Some(0), Some(1)) => return Some(args[0].not()),
                    _ => {}
                }
            }
            None
        }
        Op::Extract { hi, lo } => {
            if lo == 0 && hi + 1 == args[0].width() {
                return Some(args[0].clone());
            }
            None
        }
        Op::Zext(w) | Op::Sext(w) => {
            if w == args[0].width() {
                return Some(args[0].clone());
            }
            None
        }
        Op::Concat => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_mismatched_sorts() {
        let a = Term::var("a", Sort::bv(8), VarRole::State);
        let b = Term::var("b", Sort::bv(4), VarRole::State);
        assert!(Term::apply(Op::Add, vec![a.clone(), b.clone()]).is_err());
        assert!(Term::apply(Op::Ite, vec![a.clone(), a.clone(), a.clone()]).is_err());
        assert!(Term::apply(Op::Extract { hi: 8, lo: 0 }, vec![a]).is_err());
        assert!(Term::apply(Op::Zext(2), vec![b]).is_err());
    }

    #[test]
    fn constants_fold() {
        let t = Term::bv(7, 8).add(&Term::bv(250, 8));
        assert_eq!(t.as_const(), Some(1));
        let s = Term::bv(0x80, 8).sext(16);
        assert_eq!(s.as_const(), Some(0xff80));
        let c = Term::bv(0xa, 4).concat(&Term::bv(0x5, 4));
        assert_eq!(c.as_const(), Some(0xa5));
    }

    #[test]
    fn identities() {
        let x = Term::var("x", Sort::Bool, VarRole::Input);
        assert!(x.and(&x.not()).op().is_some());
        assert_eq!(x.and(&Term::tru()).id(), x.id());
        assert!(x.xor(&x).is_false());
        assert_eq!(x.not().not().id(), x.id());
    }

    #[test]
    fn substitution_preserves_sharing() {
        let x = Term::var("x", Sort::bv(8), VarRole::State);
        let y = x.add(&Term::bv(1, 8));
        let z = y.add(&y);
        let r = z.substitute(&mut |n, s, _| (n == "x").then(|| Term::constant(3, s)));
        assert_eq!(r.as_const(), Some(8));
        assert_eq!(z.support().len(), 1);
    }
}
