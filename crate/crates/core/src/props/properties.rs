use crate::engine::{PropertyKind, PropertySpec};
use crate::ir::{Term, TransitionSystem};

use super::macros::{
    cheri_protected_parts, env_assumption, overlap, ports, switch_signal, SymbolicAddress,
};
use super::set::{catalogue, ProtectedSet};
use super::PropsError;

struct Port {
    name: String,
    valid: Term,
    we: Term,
    addr: Term,
    size: Term,
}

fn port(ts: &TransitionSystem, p: &str) -> Result<Port, PropsError> {
    let s = |f: &str| ts.signal(&format!("{p}.{f}"));
    Ok(Port {
        name: p.to_string(),
        valid: s("valid")?,
        we: s("we")?,
        addr: s("addr")?,
        size: s("size")?,
    })
}

fn all_ports(ts: &TransitionSystem) -> Result<Vec<Port>, PropsError> {
    let ps = ports(ts);
    if ps.is_empty() {
        return Err(PropsError::MissingLabel("mem_port".into()));
    }
    ps.iter().map(|p| port(ts, p)).collect()
}

/// No write request touches `sa` while the protected-set predicate holds.
pub fn prop_integrity(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
) -> Result<PropertySpec, PropsError> {
    let cp = cheri_protected_parts(ts, ps, sa, "")?;
    let mut spec = PropertySpec::new("integrity", PropertyKind::Integrity, 1);
    spec.assume(0, cp.all().and(&env_assumption(ts, "")?));
    for p in all_ports(ts)? {
        if p.we.is_false() {
            continue;
        }
        let hit = p
            .valid
            .and(&p.we)
            .and(&overlap(&p.addr, &p.size, &sa.term()));
        spec.commit(&format!("write@{}", p.name), 0, hit.not());
    }
    if spec.commitments.is_empty() {
        spec.commit("no-write-port", 0, Term::tru());
    }
    Ok(spec)
}

/// One spec per port: no read request touches `sa`.
pub fn prop_confidentiality(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
) -> Result<Vec<PropertySpec>, PropsError> {
    let cp = cheri_protected_parts(ts, ps, sa, "")?;
    let assume = cp.all().and(&env_assumption(ts, "")?);
    let mut out = Vec::new();
    for p in all_ports(ts)? {
        let mut spec = PropertySpec::new(
            &format!("confidentiality-{}", p.name),
            PropertyKind::Confidentiality,
            1,
        );
        spec.assume(0, assume.clone());
        let hit = p
            .valid
            .and(&p.we.not())
            .and(&overlap(&p.addr, &p.size, &sa.term()));
        spec.commit(&format!("read@{}", p.name), 0, hit.not());
        out.push(spec);
    }
    Ok(out)
}

/// The predicate is preserved by one step that does not hand over to
/// another task. Load ports are environment inputs in the second cycle;
/// every register, buffer and store port is a commitment.
pub fn prop_monotonicity(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
) -> Result<PropertySpec, PropsError> {
    let cp = cheri_protected_parts(ts, ps, sa, "")?;
    let env = env_assumption(ts, "")?;
    let mut spec = PropertySpec::new("monotonicity", PropertyKind::Monotonicity, 1);
    spec.assume(0, cp.all().and(&env).and(&switch_signal(ts, "")?.not()));
    spec.assume(1, env.and(&cp.load_ports));
    for (loc, t) in &cp.state {
        spec.commit(&format!("cp:{loc}"), 1, t.clone());
    }
    spec.commit("cp:store-ports", 1, cp.store_ports.clone());
    Ok(spec)
}

/// Induction base: the task-entry predicate implies the state part of the
/// protected-set predicate.
pub fn base_spec(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
    entry: &Term,
) -> Result<PropertySpec, PropsError> {
    let cp = cheri_protected_parts(ts, ps, sa, "")?;
    let mut spec = PropertySpec::new("base", PropertyKind::InvariantBase, 1);
    spec.assume(0, entry.clone());
    for (loc, t) in &cp.state {
        spec.commit(&format!("base:{loc}"), 0, t.clone());
    }
    if cp.state.is_empty() {
        spec.commit("base:empty", 0, Term::tru());
    }
    Ok(spec)
}

/// Task entry installed by a trusted supervisor: every catalogue location
/// is untagged except the `trusted` ones, which exclude `sa`.
pub fn default_task_entry(
    ts: &TransitionSystem,
    sa: &SymbolicAddress,
    trusted: &[&str],
) -> Result<Term, PropsError> {
    let mut t = Term::tru();
    let mut keep = ProtectedSet::new();
    for loc in catalogue(ts) {
        if trusted.contains(&loc.name.as_str()) {
            keep.insert(loc)?;
        } else {
            t = t.and(&ts.signal(&format!("{}.tag", loc.name))?.not());
        }
    }
    Ok(t.and(&cheri_protected_parts(ts, &keep, sa, "")?.state_term()))
}

/// Every state with an init term equals it.
pub fn state_equals_init(ts: &TransitionSystem) -> Term {
    let mut t = Term::tru();
    for s in ts.states() {
        if let Some(i) = &s.init {
            t = t.and(&Term::var(&s.name, s.sort, crate::ir::VarRole::State).equals(i));
        }
    }
    t
}
