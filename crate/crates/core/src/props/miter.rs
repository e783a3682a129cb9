use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::engine::{PropertyKind, PropertySpec};
use crate::ir::{at_frame, Node, Op, Term, TransitionSystem, TsBuilder, VarRole};

use super::macros::{
    cheri_protected_parts, env_assumption, overlap, ports, switch_signal, SymbolicAddress,
};
use super::set::ProtectedSet;
use super::PropsError;

pub const PRIME: &str = "'";

/// Two copies of a system. States and defines of the second copy carry a
/// `'` suffix. Inputs and free symbols are shared, except memory read
/// data: a port's `rdata`/`rtag` inputs are replaced in both copies by
/// `ite(hit, <input>.only<suffix>, <input>)` where `hit` holds when either
/// copy's request on that port overlaps the symbolic address.
#[derive(Clone, Debug)]
pub struct Miter {
    pub product: TransitionSystem,
    pub sa: SymbolicAddress,
    pub coupled: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpecOptions {
    pub k: usize,
    /// Architectural states to compare; all of `P_arch` when `None`.
    pub observe: Option<Vec<String>>,
}

impl Default for UpecOptions {
    fn default() -> Self {
        UpecOptions {
            k: 4,
            observe: None,
        }
    }
}

fn private(input: &str) -> String {
    format!("{input}.only")
}

impl Miter {
    pub fn build(ts: &TransitionSystem, sa: &SymbolicAddress) -> Result<Miter, PropsError> {
        let mut coupled = Vec::new();
        let mut hits: Vec<(String, Vec<String>)> = Vec::new();
        for p in ports(ts) {
            let ins: Vec<String> = ["rdata", "rtag"]
                .iter()
                .map(|f| format!("{p}.{f}"))
                .filter(|n| ts.role_of(n) == Some(VarRole::Input))
                .collect();
            if !ins.is_empty() {
                coupled.extend(ins.iter().cloned());
                hits.push((p, ins));
            }
        }
        let prime_states = |t: &Term, memo: &mut HashMap<usize, Term>| {
            t.substitute_memo(
                &mut |n, s, r| {
                    (r == VarRole::State).then(|| Term::var(format!("{n}{PRIME}"), s, r))
                },
                memo,
            )
        };
        let mut memo_b = HashMap::new();
        let mut hit_of: HashMap<String, Term> = HashMap::new();
        for (p, ins) in &hits {
            let valid = ts.signal(&format!("{p}.valid"))?;
            let req = valid.and(&overlap(
                &ts.signal(&format!("{p}.addr"))?,
                &ts.signal(&format!("{p}.size"))?,
                &sa.term(),
            ));
            if req.support().iter().any(|(n, _, _)| coupled.contains(n)) {
                return Err(PropsError::Coupling(p.clone()));
            }
            let hit = req.or(&prime_states(&req, &mut memo_b));
            for i in ins {
                hit_of.insert(i.clone(), hit.clone());
            }
        }

        let mut b = TsBuilder::new(&format!("{}-miter", ts.name));
        for suffix in ["", PRIME] {
            for s in ts.states() {
                b.state(&format!("{}{suffix}", s.name), s.sort);
            }
        }
        for i in ts.inputs() {
            b.input(&i.name, i.sort);
        }
        for c in &coupled {
            let sort = ts.sort_of(c).unwrap();
            for suffix in ["", PRIME] {
                b.input(&format!("{}{suffix}", private(c)), sort);
            }
        }
        for f in ts.frees() {
            b.free(&f.name, f.sort);
        }
        for suffix in ["", PRIME] {
            let mut memo = HashMap::new();
            let mut map = |n: &str, s, r| match r {
                VarRole::State => Some(Term::var(format!("{n}{suffix}"), s, r)),
                VarRole::Input if hit_of.contains_key(n) => Some(Term::ite(
                    &hit_of[n],
                    &Term::var(format!("{}{suffix}", private(n)), s, r),
                    &Term::var(n, s, r),
                )),
                _ => None,
            };
            for s in ts.states() {
                let name = format!("{}{suffix}", s.name);
                b.next(&name, s.next.substitute_memo(&mut map, &mut memo));
                if let Some(i) = &s.init {
                    b.init(&name, i.substitute_memo(&mut map, &mut memo));
                }
            }
            for (n, t) in ts.defines() {
                b.define(
                    &format!("{n}{suffix}"),
                    t.substitute_memo(&mut map, &mut memo),
                );
            }
        }
        for (tag, names) in ts.labels() {
            for suffix in ["", PRIME] {
                for n in names {
                    match ts.role_of(n) {
                        Some(VarRole::Input) | Some(VarRole::Free) => b.label(tag, n),
                        _ => b.label(tag, &format!("{n}{suffix}")),
                    }
                }
            }
        }
        Ok(Miter {
            product: b.build()?,
            sa: sa.clone(),
            coupled,
        })
    }

    /// Name of the corresponding item in the other instance.
    pub fn twin(&self, name: &str) -> String {
        if let Some(base) = name.strip_suffix(PRIME) {
            return base.to_string();
        }
        let p = format!("{name}{PRIME}");
        if self.product.role_of(&p).is_some() || self.product.define(&p).is_some() {
            p
        } else {
            name.to_string()
        }
    }

    /// Renames every variable to its twin.
    pub fn rename(&self, t: &Term) -> Term {
        t.substitute(&mut |n, s, r| {
            let tw = self.twin(n);
            (tw != n).then(|| Term::var(tw, s, r))
        })
    }

    /// The same miter with the roles of the two instances exchanged.
    pub fn swap(&self) -> Result<Miter, PropsError> {
        let ts = &self.product;
        let mut b = TsBuilder::new(&ts.name);
        for s in ts.states() {
            b.state(&self.twin(&s.name), s.sort);
        }
        for i in ts.inputs() {
            b.input(&self.twin(&i.name), i.sort);
        }
        for f in ts.frees() {
            b.free(&f.name, f.sort);
        }
        for s in ts.states() {
            b.next(&self.twin(&s.name), self.rename(&s.next));
            if let Some(i) = &s.init {
                b.init(&self.twin(&s.name), self.rename(i));
            }
        }
        for (n, t) in ts.defines() {
            b.define(&self.twin(n), self.rename(t));
        }
        for (tag, names) in ts.labels() {
            for n in names {
                b.label(tag, &self.twin(n));
            }
        }
        Ok(Miter {
            product: b.build()?,
            sa: self.sa.clone(),
            coupled: self.coupled.clone(),
        })
    }

    /// True if renaming every item of `self` to its twin yields `other`
    /// up to commutativity.
    pub fn is_swap_of(&self, other: &Miter) -> bool {
        let a = &self.product;
        let b = &other.product;
        if a.states().len() != b.states().len() || a.defines().len() != b.defines().len() {
            return false;
        }
        let mut memo = HashMap::new();
        let mut memo2 = HashMap::new();
        let mut same =
            |x: Term, y: &Term| canonical_memo(&x, &mut memo) == canonical_memo(y, &mut memo2);
        a.states()
            .iter()
            .all(|s| match b.state(&self.twin(&s.name)) {
                Some(t) => same(self.rename(&s.next), &t.next),
                None => false,
            })
            && a.defines()
                .iter()
                .all(|(n, t)| match b.define(&self.twin(n)) {
                    Some(u) => same(self.rename(t), u),
                    None => false,
                })
    }
}

/// Structural hash of a term that ignores operand order of commutative
/// operators.
pub fn canonical(t: &Term) -> u64 {
    canonical_memo(t, &mut HashMap::new())
}

fn canonical_memo(t: &Term, memo: &mut HashMap<usize, u64>) -> u64 {
    let mut stack = vec![(t.clone(), false)];
    while let Some((cur, expanded)) = stack.pop() {
        if memo.contains_key(&cur.id()) {
            continue;
        }
        let mut h = DefaultHasher::new();
        match cur.node() {
            Node::Const { value, sort } => (0u8, value, sort.width(), sort.is_bool()).hash(&mut h),
            Node::Var { name, sort, .. } => {
                (1u8, name.as_ref(), sort.width(), sort.is_bool()).hash(&mut h)
            }
            Node::App { op, args, sort } => {
                if !expanded {
                    stack.push((cur.clone(), true));
                    for a in args {
                        stack.push((a.clone(), false));
                    }
                    continue;
                }
                let mut hs: Vec<u64> = args.iter().map(|a| memo[&a.id()]).collect();
                if matches!(op, Op::And | Op::Or | Op::Xor | Op::Eq | Op::Add) {
                    hs.sort_unstable();
                }
                (2u8, op.mnemonic(), sort.width(), sort.is_bool(), hs).hash(&mut h);
            }
        }
        memo.insert(cur.id(), h.finish());
    }
    memo[&t.id()]
}

fn frames_guard(ts: &TransitionSystem, sw: &Term, upto: usize) -> Term {
    // No switch in frames 0..upto.
    let mut g = Term::tru();
    for j in 0..upto {
        g = g.and(&at_frame(ts, sw, j).not());
    }
    g
}

fn equal_pairs(ts: &TransitionSystem, names: &[String], frame: usize) -> Result<Term, PropsError> {
    let mut t = Term::tru();
    for n in names {
        let a = ts.signal(n)?;
        let b = ts.signal(&format!("{n}{PRIME}"))?;
        t = t.and(&at_frame(ts, &a.equals(&b), frame));
    }
    Ok(t)
}

fn unprimed(names: &[String]) -> Vec<String> {
    names
        .iter()
        .filter(|n| !n.ends_with(PRIME))
        .cloned()
        .collect()
}

/// Shared assumptions of the leakage checks over a miter: equal processor
/// state at the start, the protected-set predicate in every frame before
/// a context switch of that instance, and the environment in every frame.
fn upec_assumptions(
    m: &Miter,
    ps: &ProtectedSet,
    k: usize,
    spec: &mut PropertySpec,
) -> Result<(), PropsError> {
    let ts = &m.product;
    let p = unprimed(ts.label("P"));
    if p.is_empty() {
        return Err(PropsError::MissingLabel("P".into()));
    }
    spec.assume(0, equal_pairs(ts, &p, 0)?);
    for suffix in ["", PRIME] {
        let cp = cheri_protected_parts(ts, ps, &m.sa, suffix)?.all();
        let sw = switch_signal(ts, suffix)?;
        let env = env_assumption(ts, suffix)?;
        for i in 0..=k {
            let g = frames_guard(ts, &sw, i);
            spec.assume(
                i,
                g.implies(&at_frame(ts, &cp, i)).and(&at_frame(ts, &env, i)),
            );
        }
    }
    Ok(())
}

fn sync_switch_before(ts: &TransitionSystem, i: usize) -> Result<Term, PropsError> {
    // Both instances handed over in the same frame j <= i - 2.
    let a = switch_signal(ts, "")?;
    let b = switch_signal(ts, PRIME)?;
    let mut t = Term::fals();
    for j in 0..i.saturating_sub(1) {
        t = t.or(&at_frame(ts, &a.and(&b), j));
    }
    Ok(t)
}

fn observed(
    ts: &TransitionSystem,
    tag: &str,
    observe: &Option<Vec<String>>,
) -> Result<Vec<String>, PropsError> {
    let names = unprimed(ts.label(tag));
    if names.is_empty() {
        return Err(PropsError::MissingLabel(tag.into()));
    }
    Ok(match observe {
        Some(o) => names.into_iter().filter(|n| o.contains(n)).collect(),
        None => names,
    })
}

fn upec_spec(
    m: &Miter,
    ps: &ProtectedSet,
    opts: &UpecOptions,
    tag: &str,
    name: &str,
) -> Result<PropertySpec, PropsError> {
    let ts = &m.product;
    let mut spec = PropertySpec::new(name, PropertyKind::Upec, opts.k);
    spec.instances = 2;
    upec_assumptions(m, ps, opts.k, &mut spec)?;
    let names = observed(ts, tag, &opts.observe)?;
    for i in 1..=opts.k {
        let eq = equal_pairs(ts, &names, i)?;
        spec.commit(&format!("{tag}@{i}"), i, sync_switch_before(ts, i)?.or(&eq));
    }
    Ok(spec)
}

/// Two-instance leakage check: starting from equal processor states,
/// with memory contents differing only at the symbolic address, the
/// architectural states stay equal for `k` cycles.
pub fn prop_upec_miter(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
    opts: &UpecOptions,
) -> Result<(Miter, PropertySpec), PropsError> {
    let m = Miter::build(ts, sa)?;
    let spec = upec_spec(&m, ps, opts, "P_arch", "upec")?;
    Ok((m, spec))
}

/// Same setting, comparing the microarchitectural states; a failure
/// while the architectural check holds is a P-alert.
pub fn prop_upec_uarch(
    m: &Miter,
    ps: &ProtectedSet,
    opts: &UpecOptions,
) -> Result<PropertySpec, PropsError> {
    upec_spec(
        m,
        ps,
        &UpecOptions {
            k: opts.k,
            observe: None,
        },
        "P_uarch",
        "upec-uarch",
    )
}

/// One-cycle step of the leakage check: from equal processor states with
/// the protected-set predicate holding in both instances, the hand-over
/// decision agrees and the processor states stay equal. When it holds,
/// equality of all processor state is preserved up to the first
/// hand-over, which is then synchronous, so the windowed check holds for
/// every `k`.
pub fn prop_upec_step(m: &Miter, ps: &ProtectedSet) -> Result<PropertySpec, PropsError> {
    let ts = &m.product;
    let p = unprimed(ts.label("P"));
    if p.is_empty() {
        return Err(PropsError::MissingLabel("P".into()));
    }
    let mut spec = PropertySpec::new("upec-step", PropertyKind::Upec, 1);
    spec.instances = 2;
    spec.assume(0, equal_pairs(ts, &p, 0)?);
    for suffix in ["", PRIME] {
        let cp = cheri_protected_parts(ts, ps, &m.sa, suffix)?.all();
        spec.assume(0, cp.and(&env_assumption(ts, suffix)?));
    }
    let sw = switch_signal(ts, "")?.equals(&switch_signal(ts, PRIME)?);
    spec.commit("switch@0", 0, sw);
    spec.commit("P@1", 1, equal_pairs(ts, &p, 1)?);
    Ok(spec)
}

/// Leakage spec on an already built miter.
pub fn upec_on(
    m: &Miter,
    ps: &ProtectedSet,
    opts: &UpecOptions,
) -> Result<PropertySpec, PropsError> {
    upec_spec(m, ps, opts, "P_arch", "upec")
}
