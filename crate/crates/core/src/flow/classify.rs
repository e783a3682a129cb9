use serde::Serialize;

use crate::engine::{evaluate_spec, resimulate, Counterexample, PropertySpec};
use crate::ir::{Evaluator, TransitionSystem, Valuation};
use crate::props::{
    cheri_protected_parts, CapLocation, LocationKind, PropsError, ProtectedSet, SymbolicAddress,
};

use super::FlowError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Classification {
    /// A location outside the protected set holds a capability to the
    /// protected address in the first frame.
    FalseCex {
        candidate: CapLocation,
    },
    TrueBug,
}

/// Forced outcome of classification, for runs that need a fixed answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassOverride {
    TrueBug,
    FalseCex,
}

/// Frame-0 scan of a counterexample. `candidates` gives the locations to
/// try, in order; members of `ps` are skipped.
pub fn classify_counterexample(
    ts: &TransitionSystem,
    sa: &SymbolicAddress,
    cex: &Counterexample,
    ps: &ProtectedSet,
    candidates: &[CapLocation],
) -> Result<Classification, FlowError> {
    let Some(first) = cex.frames.first() else {
        return Err(FlowError::Precondition(
            "counterexample has no frames".into(),
        ));
    };
    let mut vals: Valuation = first.clone();
    for s in ts
        .states()
        .iter()
        .map(|s| &s.name)
        .chain(ts.inputs().iter().map(|v| &v.name))
    {
        if !vals.contains_key(s) {
            return Err(FlowError::InvalidTrace(format!(
                "frame 0 has no value for `{s}`"
            )));
        }
    }
    vals.extend(cex.frees.clone());
    if !vals.contains_key(&sa.name) {
        return Err(FlowError::InvalidTrace(format!(
            "trace has no value for `{}`",
            sa.name
        )));
    }
    let mut ev = Evaluator::new(&vals);
    for loc in candidates {
        if ps.contains(&loc.name) {
            continue;
        }
        let mut one = ProtectedSet::new();
        one.insert(loc.clone())?;
        let parts = cheri_protected_parts(ts, &one, sa, "")?;
        let t = match loc.kind {
            LocationKind::Register | LocationKind::Buffer => parts.state_term(),
            LocationKind::LoadPort => parts.load_ports,
            LocationKind::StorePort => parts.store_ports,
        };
        if !ev.eval_bool(&t)? {
            return Ok(Classification::FalseCex {
                candidate: loc.clone(),
            });
        }
    }
    Ok(Classification::TrueBug)
}

/// `ps` extended by `candidate`.
pub fn refine_protected_set(
    ps: &ProtectedSet,
    candidate: &CapLocation,
) -> Result<ProtectedSet, PropsError> {
    let mut out = ps.clone();
    out.insert(candidate.clone())?;
    Ok(out)
}

/// Replays the first state and inputs of `cex` on a variant of the
/// system. True when the variant satisfies the assumptions and every
/// commitment along that trace.
pub fn variant_clears(
    ts: &TransitionSystem,
    spec: &PropertySpec,
    cex: &Counterexample,
) -> Result<bool, FlowError> {
    let replayed = resimulate(ts, cex)?;
    let (assumed, violated) = evaluate_spec(ts, spec, &replayed)?;
    Ok(assumed && violated.is_empty())
}
