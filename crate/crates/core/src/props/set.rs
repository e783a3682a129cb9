use serde::{Deserialize, Serialize};

use crate::ir::TransitionSystem;

use super::PropsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocationKind {
    Register,
    Buffer,
    LoadPort,
    StorePort,
}

impl LocationKind {
    pub fn is_port(self) -> bool {
        matches!(self, LocationKind::LoadPort | LocationKind::StorePort)
    }
}

/// Group of signals `<name>.tag`, `<name>.base`, `<name>.top` and
/// optionally `<name>.otype` and `<name>.valid` that together hold one
/// capability.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CapLocation {
    pub name: String,
    pub kind: LocationKind,
}

impl CapLocation {
    pub fn new(name: &str, kind: LocationKind) -> CapLocation {
        CapLocation {
            name: name.to_string(),
            kind,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedSet {
    #[serde(rename = "location", default)]
    pub locations: Vec<CapLocation>,
}

fn strip_tag(name: &str) -> &str {
    name.strip_suffix(".tag").unwrap_or(name)
}

/// Capability-holding state locations of a system, from its
/// `cap_register` and `cap_buffer` labels, in label order.
pub fn catalogue(ts: &TransitionSystem) -> Vec<CapLocation> {
    let regs = ts
        .label("cap_register")
        .iter()
        .map(|n| CapLocation::new(strip_tag(n), LocationKind::Register));
    let bufs = ts
        .label("cap_buffer")
        .iter()
        .map(|n| CapLocation::new(strip_tag(n), LocationKind::Buffer));
    regs.chain(bufs).collect()
}

/// Capability-carrying memory port signals, from the `cap_load_port` and
/// `cap_store_port` labels.
pub fn port_locations(ts: &TransitionSystem) -> Vec<CapLocation> {
    let ld = ts
        .label("cap_load_port")
        .iter()
        .map(|n| CapLocation::new(strip_tag(n), LocationKind::LoadPort));
    let st = ts
        .label("cap_store_port")
        .iter()
        .map(|n| CapLocation::new(strip_tag(n), LocationKind::StorePort));
    ld.chain(st).collect()
}

impl ProtectedSet {
    pub fn new() -> ProtectedSet {
        ProtectedSet::default()
    }

    /// The named catalogue locations plus every memory port location.
    pub fn with_ports(ts: &TransitionSystem, names: &[&str]) -> Result<ProtectedSet, PropsError> {
        let mut ps = ProtectedSet::new();
        let cat = catalogue(ts);
        for n in names {
            let loc = cat
                .iter()
                .find(|c| c.name == *n)
                .ok_or_else(|| PropsError::Unresolved {
                    location: n.to_string(),
                    signal: format!("{n}.tag"),
                })?;
            ps.insert(loc.clone())?;
        }
        for p in port_locations(ts) {
            ps.insert(p)?;
        }
        Ok(ps)
    }

    /// Every catalogue and port location of the system.
    pub fn full(ts: &TransitionSystem) -> ProtectedSet {
        let mut locations = catalogue(ts);
        locations.extend(port_locations(ts));
        ProtectedSet { locations }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.locations.iter().any(|l| l.name == name)
    }

    pub fn insert(&mut self, loc: CapLocation) -> Result<(), PropsError> {
        if self.contains(&loc.name) {
            return Err(PropsError::Duplicate(loc.name));
        }
        self.locations.push(loc);
        Ok(())
    }

    pub fn state_locations(&self) -> impl Iterator<Item = &CapLocation> {
        self.locations.iter().filter(|l| !l.kind.is_port())
    }

    pub fn names(&self) -> Vec<&str> {
        self.locations.iter().map(|l| l.name.as_str()).collect()
    }

    /// Locations sorted by name, for order-insensitive comparison.
    pub fn sorted(&self) -> Vec<CapLocation> {
        let mut v = self.locations.clone();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }

    /// Checks that every location resolves against `ts`.
    pub fn validate(&self, ts: &TransitionSystem) -> Result<(), PropsError> {
        for (i, l) in self.locations.iter().enumerate() {
            if self.locations[..i].iter().any(|m| m.name == l.name) {
                return Err(PropsError::Duplicate(l.name.clone()));
            }
            let mut need = vec!["tag", "base", "top"];
            if l.kind.is_port() {
                need.push("valid");
            }
            for f in need {
                let s = format!("{}.{f}", l.name);
                if ts.signal(&s).is_err() {
                    return Err(PropsError::Unresolved {
                        location: l.name.clone(),
                        signal: s,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("protected set serializes")
    }

    pub fn from_toml(text: &str) -> Result<ProtectedSet, PropsError> {
        toml::from_str(text).map_err(|e| PropsError::Format(e.to_string()))
    }
}
