use crate::ir::{Sort, Term, TransitionSystem, VarRole};

use super::set::{LocationKind, ProtectedSet};
use super::PropsError;

/// Free symbol standing for an arbitrary protected address.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicAddress {
    pub name: String,
    pub sort: Sort,
}

impl SymbolicAddress {
    pub fn term(&self) -> Term {
        Term::var(&self.name, self.sort, VarRole::Free)
    }
}

/// Memory ports named by the `mem_port` label (`<port>.valid`).
pub fn ports(ts: &TransitionSystem) -> Vec<String> {
    ts.label("mem_port")
        .iter()
        .map(|n| n.strip_suffix(".valid").unwrap_or(n).to_string())
        .collect()
}

/// Adds the free symbol `sa` with the width of the memory addresses, or
/// reuses it if present.
pub fn attach_symbolic_address(
    ts: &TransitionSystem,
) -> Result<(TransitionSystem, SymbolicAddress), PropsError> {
    let port = ports(ts)
        .into_iter()
        .next()
        .ok_or_else(|| PropsError::MissingLabel("mem_port".into()))?;
    let sort = ts.signal(&format!("{port}.addr"))?.sort();
    let sa = SymbolicAddress {
        name: "sa".into(),
        sort,
    };
    if ts.role_of("sa") == Some(VarRole::Free) {
        return Ok((ts.clone(), sa));
    }
    Ok((ts.with_frees(&[("sa".into(), sort)])?, sa))
}

/// `sa` lies in `[addr, addr + size)`, modulo the address width.
pub fn overlap(addr: &Term, size: &Term, sa: &Term) -> Term {
    let w = sa.width();
    sa.sub(&addr.resize(w)).ult(&size.resize(w))
}

fn signal(ts: &TransitionSystem, loc: &str, field: &str, suffix: &str) -> Option<Term> {
    ts.signal(&format!("{loc}.{field}{suffix}")).ok()
}

fn required(
    ts: &TransitionSystem,
    loc: &str,
    field: &str,
    suffix: &str,
) -> Result<Term, PropsError> {
    signal(ts, loc, field, suffix).ok_or_else(|| PropsError::Unresolved {
        location: loc.to_string(),
        signal: format!("{loc}.{field}{suffix}"),
    })
}

/// The capability at `loc` is not a tagged, unsealed capability whose
/// bounds contain `sa`. Port locations only constrain cycles in which
/// they carry a capability.
fn excludes(
    ts: &TransitionSystem,
    loc: &str,
    port: bool,
    sa: &Term,
    suffix: &str,
) -> Result<Term, PropsError> {
    let tag = required(ts, loc, "tag", suffix)?;
    let base = required(ts, loc, "base", suffix)?;
    let top = required(ts, loc, "top", suffix)?;
    let w = top.width().max(sa.width() + 1);
    let s = sa.zext(w);
    let mut covers = tag.and(&base.zext(w).ule(&s)).and(&s.ult(&top.zext(w)));
    if let Some(ot) = signal(ts, loc, "otype", suffix) {
        covers = covers.and(&ot.equals(&Term::bv(0, ot.width())));
    }
    if port {
        covers = covers.and(&required(ts, loc, "valid", suffix)?);
    }
    Ok(covers.not())
}

/// The protected-set predicate split by location.
#[derive(Clone, Debug)]
pub struct CpParts {
    /// One term per register or buffer location.
    pub state: Vec<(String, Term)>,
    pub load_ports: Term,
    pub store_ports: Term,
}

impl CpParts {
    pub fn state_term(&self) -> Term {
        Term::and_all(self.state.iter().map(|(_, t)| t))
    }

    pub fn all(&self) -> Term {
        self.state_term()
            .and(&self.load_ports)
            .and(&self.store_ports)
    }
}

/// Builds the predicate per location. `suffix` selects an instance of a
/// miter (`""` or `"'"`).
pub fn cheri_protected_parts(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
    suffix: &str,
) -> Result<CpParts, PropsError> {
    let sa = sa.term();
    let mut parts = CpParts {
        state: Vec::new(),
        load_ports: Term::tru(),
        store_ports: Term::tru(),
    };
    for l in &ps.locations {
        let t = excludes(ts, &l.name, l.kind.is_port(), &sa, suffix)?;
        match l.kind {
            LocationKind::Register | LocationKind::Buffer => parts.state.push((l.name.clone(), t)),
            LocationKind::LoadPort => parts.load_ports = parts.load_ports.and(&t),
            LocationKind::StorePort => parts.store_ports = parts.store_ports.and(&t),
        }
    }
    Ok(parts)
}

/// Conjunction over all locations of the protected set.
pub fn build_cheri_protected(
    ts: &TransitionSystem,
    ps: &ProtectedSet,
    sa: &SymbolicAddress,
) -> Result<Term, PropsError> {
    Ok(cheri_protected_parts(ts, ps, sa, "")?.all())
}

/// Conjunction of the signals labelled `env`.
pub fn env_assumption(ts: &TransitionSystem, suffix: &str) -> Result<Term, PropsError> {
    let mut t = Term::tru();
    for n in ts.label("env") {
        if n.ends_with('\'') {
            continue;
        }
        t = t.and(&ts.signal(&format!("{n}{suffix}"))?);
    }
    Ok(t)
}

/// Disjunction of the signals labelled `switch`.
pub fn switch_signal(ts: &TransitionSystem, suffix: &str) -> Result<Term, PropsError> {
    let mut t = Term::fals();
    for n in ts.label("switch") {
        if n.ends_with('\'') {
            continue;
        }
        t = t.or(&ts.signal(&format!("{n}{suffix}"))?);
    }
    Ok(t)
}
