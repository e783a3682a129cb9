//! Explicit-state two-instance exploration for tiny systems with an
//! explicit memory, used as ground truth for the symbolic checks.
//!
//! The system must label its memory words `mem` (word `j` has address
//! `j`), its processor state `P` and, for the integrity check, the task
//! data `data`.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use serde::{Deserialize, Serialize};

use crate::ir::{Simulator, TransitionSystem, Valuation};

use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplicitKind {
    /// Instances differ in protected memory; processor state and public
    /// memory must stay equal.
    Eq1Confidentiality,
    /// Instances differ in task data; protected memory must stay equal.
    Eq2Integrity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitLimits {
    pub max_states: usize,
    pub max_state_bits: u32,
    pub max_input_bits: u32,
}

impl Default for ExplicitLimits {
    fn default() -> Self {
        ExplicitLimits {
            max_states: 1 << 22,
            max_state_bits: 32,
            max_input_bits: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TracePair {
    pub inputs: Vec<Valuation>,
    pub a: Vec<Valuation>,
    pub b: Vec<Valuation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ExplicitResult {
    Holds { product_states: usize },
    Fails(TracePair),
}

impl ExplicitResult {
    pub fn holds(&self) -> bool {
        matches!(self, ExplicitResult::Holds { .. })
    }
}

struct Layout {
    slots: Vec<(usize, u32, u32)>,
    names: Vec<String>,
}

impl Layout {
    fn pack(&self, sim: &Simulator) -> u64 {
        self.slots
            .iter()
            .fold(0, |acc, &(slot, _, off)| acc | (sim.get_at(slot) << off))
    }

    fn unpack(&self, v: u64, sim: &mut Simulator) {
        for &(slot, w, off) in &self.slots {
            sim.set_at(slot, (v >> off) & ((1u64 << w) - 1));
        }
    }

    fn valuation(&self, v: u64) -> Valuation {
        self.slots
            .iter()
            .zip(&self.names)
            .map(|(&(_, w, off), n)| (n.clone(), (v >> off) & ((1u64 << w) - 1)))
            .collect()
    }

    fn mask_of(&self, names: &[String]) -> u64 {
        let mut m = 0;
        for (n, &(_, w, off)) in self.names.iter().zip(&self.slots) {
            if names.contains(n) {
                m |= ((1u64 << w) - 1) << off;
            }
        }
        m
    }
}

/// Breadth-first exploration of the two-instance product to `depth`
/// steps, both instances receiving the same inputs.
pub fn explicit_state_check(
    ts: &TransitionSystem,
    kind: ExplicitKind,
    m_prot: &BTreeSet<u64>,
    depth: usize,
    limits: &ExplicitLimits,
) -> Result<ExplicitResult, EngineError> {
    let limit = |m: String| EngineError::StateSpaceLimit(m);
    let mem = ts.label("mem").to_vec();
    if mem.is_empty() {
        return Err(limit(format!("`{}` has no explicit memory", ts.name)));
    }
    if let Some(a) = m_prot.iter().find(|&&a| a as usize >= mem.len()) {
        return Err(limit(format!(
            "protected address {a} outside the {}-word memory",
            mem.len()
        )));
    }
    let bits: u32 = ts.states().iter().map(|s| s.sort.width()).sum();
    if bits > limits.max_state_bits {
        return Err(limit(format!(
            "`{}` has {bits} state bits, limit is {}",
            ts.name, limits.max_state_bits
        )));
    }
    let in_bits: u32 = ts.inputs().iter().map(|v| v.sort.width()).sum();
    if in_bits > limits.max_input_bits {
        return Err(limit(format!(
            "`{}` has {in_bits} input bits, limit is {}",
            ts.name, limits.max_input_bits
        )));
    }

    let mut sim = Simulator::new(ts);
    let mut off = 0;
    let mut layout = Layout {
        slots: Vec::new(),
        names: Vec::new(),
    };
    for s in ts.states() {
        layout
            .slots
            .push((sim.slot_of(&s.name).unwrap(), s.sort.width(), off));
        layout.names.push(s.name.clone());
        off += s.sort.width();
    }
    let input_slots: Vec<(usize, u32)> = ts
        .inputs()
        .iter()
        .map(|v| (sim.slot_of(&v.name).unwrap(), v.sort.width()))
        .collect();

    let init = ts.initial_state(|_| 0)?;
    let prot_names: Vec<String> = m_prot.iter().map(|&a| mem[a as usize].clone()).collect();
    let pub_names: Vec<String> = mem
        .iter()
        .filter(|n| !prot_names.contains(n))
        .cloned()
        .collect();
    let mut a0 = init.clone();
    let mut b0 = init;
    let observed = match kind {
        ExplicitKind::Eq1Confidentiality => {
            for n in &prot_names {
                a0.insert(n.clone(), 0);
                b0.insert(n.clone(), ts.sort_of(n).unwrap().mask());
            }
            let mut obs = ts.label("P").to_vec();
            obs.extend(pub_names);
            obs
        }
        ExplicitKind::Eq2Integrity => {
            for n in ts.label("data") {
                a0.insert(n.clone(), 0);
                b0.insert(n.clone(), ts.sort_of(n).unwrap().mask());
            }
            prot_names
        }
    };
    let mask = layout.mask_of(&observed);
    sim.load(&a0);
    let a0 = layout.pack(&sim);
    sim.load(&b0);
    let b0 = layout.pack(&sim);

    let codes = 1u64 << in_bits;
    let mut succ: FxHashMap<u64, Vec<u64>> = FxHashMap::default();
    let mut successors = |s: u64, sim: &mut Simulator| -> Vec<u64> {
        succ.entry(s)
            .or_insert_with(|| {
                (0..codes)
                    .map(|code| {
                        layout.unpack(s, sim);
                        let mut c = code;
                        for &(slot, w) in &input_slots {
                            sim.set_at(slot, c & ((1u64 << w) - 1));
                            c >>= w;
                        }
                        sim.step();
                        layout.pack(sim)
                    })
                    .collect()
            })
            .clone()
    };

    type Pair = (u64, u64);
    let mut parent: FxHashMap<Pair, Option<(Pair, u64)>> = FxHashMap::default();
    parent.insert((a0, b0), None);
    let trace = |end: Pair, parent: &FxHashMap<Pair, Option<(Pair, u64)>>| -> TracePair {
        let mut pairs = vec![end];
        let mut codes = Vec::new();
        let mut cur = end;
        while let Some(Some((p, c))) = parent.get(&cur) {
            pairs.push(*p);
            codes.push(*c);
            cur = *p;
        }
        pairs.reverse();
        codes.reverse();
        let inputs = codes
            .iter()
            .map(|&code| {
                let mut c = code;
                ts.inputs()
                    .iter()
                    .map(|v| {
                        let w = v.sort.width();
                        let x = c & ((1u64 << w) - 1);
                        c >>= w;
                        (v.name.clone(), x)
                    })
                    .collect()
            })
            .collect();
        TracePair {
            inputs,
            a: pairs.iter().map(|p| layout.valuation(p.0)).collect(),
            b: pairs.iter().map(|p| layout.valuation(p.1)).collect(),
        }
    };
    if mask == 0 {
        return Ok(ExplicitResult::Holds { product_states: 1 });
    }
    if (a0 ^ b0) & mask != 0 {
        return Ok(ExplicitResult::Fails(trace((a0, b0), &parent)));
    }
    let mut frontier = vec![(a0, b0)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &(a, b) in &frontier {
            let sa = successors(a, &mut sim);
            let sb = if a == b {
                sa.clone()
            } else {
                successors(b, &mut sim)
            };
            for (code, (&na, &nb)) in sa.iter().zip(&sb).enumerate() {
                let code = code as u64;
                let pair = (na, nb);
                if parent.contains_key(&pair) {
                    continue;
                }
                parent.insert(pair, Some(((a, b), code)));
                if (na ^ nb) & mask != 0 {
                    return Ok(ExplicitResult::Fails(trace(pair, &parent)));
                }
                if parent.len() > limits.max_states {
                    return Err(limit(format!(
                        "more than {} product states",
                        limits.max_states
                    )));
                }
                next.push(pair);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(ExplicitResult::Holds {
        product_states: parent.len(),
    })
}
