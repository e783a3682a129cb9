//! Interval property checking over a symbolic starting state.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ir::{
    at_frame, eval_term, frame_name, split_frame_name, unroll_window, Evaluator, Op, Term,
    TransitionSystem, Valuation, VarRole,
};

use super::aig::{neg, BitBlaster, Lit};
use super::backend::{solve, SolverOptions};
use super::cnf::{CnfEncoder, CnfFormula};
use super::property::{PropertyKind, PropertySpec, Timed};
use super::sat::SolveOutcome;
use super::EngineError;

/// Kind of divergence in a two-instance counterexample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alert {
    None,
    /// Only microarchitectural state differs.
    PAlert,
    /// Architectural state differs.
    LAlert,
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub property: String,
    pub k: usize,
    /// Values of the free symbols, such as the symbolic address.
    pub frees: Valuation,
    /// States and inputs per frame, under their unframed names.
    pub frames: Vec<Valuation>,
    pub violated: Vec<String>,
    pub alert: Alert,
    /// `name@frame` for every labelled state that differs between the
    /// two instances of a miter.
    pub diverged: Vec<String>,
}

impl Counterexample {
    pub fn value(&self, name: &str, frame: usize) -> Option<u64> {
        self.frees
            .get(name)
            .or_else(|| self.frames.get(frame)?.get(name))
            .copied()
    }

    /// All values keyed by framed name, plus the free symbols.
    pub fn flat(&self) -> Valuation {
        let mut out = self.frees.clone();
        for (i, f) in self.frames.iter().enumerate() {
            for (n, v) in f {
                out.insert(frame_name(n, i), *v);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckStats {
    pub vars: u32,
    pub clauses: usize,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    #[serde(skip)]
    pub time: Duration,
}

#[derive(Clone, Debug)]
pub enum Status {
    Holds,
    Fails(Box<Counterexample>),
    Unknown(String),
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub status: Status,
    pub stats: CheckStats,
}

impl CheckResult {
    pub fn holds(&self) -> bool {
        matches!(self.status, Status::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self.status, Status::Fails(_))
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match &self.status {
            Status::Fails(c) => Some(c),
            _ => None,
        }
    }

    pub fn verdict(&self) -> &'static str {
        match self.status {
            Status::Holds => "hold",
            Status::Fails(_) => "fail",
            Status::Unknown(_) => "unknown",
        }
    }
}

/// Frame-0 state equalities `x@0 = y@0` found among the assumption
/// conjuncts, as a map from each aliased name to its representative.
fn frame0_aliases(ts: &TransitionSystem, assumptions: &[Term]) -> HashMap<String, Term> {
    let mut parent: HashMap<String, String> = HashMap::new();
    fn find(p: &HashMap<String, String>, x: &str) -> String {
        let mut x = x.to_string();
        while let Some(n) = p.get(&x) {
            x = n.clone();
        }
        x
    }
    let frame0_state = |t: &Term| -> Option<String> {
        let (name, _, role) = t.as_var()?;
        let (base, i) = split_frame_name(name)?;
        (role == VarRole::State && i == 0 && ts.state(base).is_some()).then(|| name.to_string())
    };
    let mut sorts = HashMap::new();
    for a in assumptions {
        for c in a.conjuncts() {
            if c.op() != Some(Op::Eq) {
                continue;
            }
            let (x, y) = (&c.args()[0], &c.args()[1]);
            if let (Some(nx), Some(ny)) = (frame0_state(x), frame0_state(y)) {
                let (rx, ry) = (find(&parent, &nx), find(&parent, &ny));
                if rx != ry {
                    sorts.insert(rx.clone(), x.sort());
                    parent.insert(ry, rx);
                }
            }
        }
    }
    let names: Vec<String> = parent.keys().cloned().collect();
    names
        .into_iter()
        .map(|n| {
            let r = find(&parent, &n);
            let sort = sorts[&r];
            (n, Term::var(&r, sort, VarRole::State))
        })
        .collect()
}

fn bits_value(
    bb: &BitBlaster,
    bits: &[Lit],
    model: &[bool],
    enc: &CnfEncoder,
    memo: &mut HashMap<u32, bool>,
) -> u64 {
    let input = |node: u32| enc.var_of(node).map(|v| model[v as usize]).unwrap_or(false);
    let mut v = 0u64;
    for (i, &b) in bits.iter().enumerate() {
        if bb.aig.eval(b, &input, memo) {
            v |= 1 << i;
        }
    }
    v
}

/// Unrolls the system over the spec's window, asserts the assumptions and
/// the negated conjunction of the commitments, and decides the result.
/// Counterexamples are replayed through `simulate_step` before they are
/// returned.
pub fn check_interval_property(
    ts: &TransitionSystem,
    spec: &PropertySpec,
    opts: &SolverOptions,
) -> Result<CheckResult, EngineError> {
    let start = Instant::now();
    spec.validate(ts)?;
    let mut u = unroll_window(ts, spec.k)?;
    let assumptions: Vec<Term> = spec
        .assumptions
        .iter()
        .map(|a| u.at(&a.term, a.offset))
        .collect();
    let commitments: Vec<(String, Term)> = spec
        .commitments
        .iter()
        .map(|c| (c.id.clone(), u.at(&c.term, c.offset)))
        .collect();
    let alias = frame0_aliases(ts, &assumptions);
    let defs = u.definitions();
    let mut resolver = |name: &str| alias.get(name).cloned().or_else(|| defs.get(name).cloned());

    let mut bb = BitBlaster::new();
    let mut base = CnfEncoder::new();
    for a in &assumptions {
        let l = bb.blast_bool(a, &mut resolver);
        base.assert(&bb.aig, l);
    }
    let mut goods = Vec::new();
    for (_, c) in &commitments {
        goods.push(bb.blast_bool(c, &mut resolver));
    }
    // One query per commitment keeps each cone small; the joint query is
    // used when splitting is off.
    let queries: Vec<Vec<Lit>> = if opts.split_commitments {
        goods.iter().map(|g| vec![*g]).collect()
    } else {
        vec![goods.clone()]
    };
    let deadline = start + Duration::from_secs_f64(opts.timeout_secs.max(0.0));
    let mut stats = CheckStats::default();
    let mut unknown = false;
    let mut found = None;
    for q in queries {
        let mut enc = base.clone();
        let all_good = bb.aig.and_all(&q);
        enc.assert(&bb.aig, neg(all_good));
        let mut o = opts.clone();
        o.timeout_secs = deadline
            .saturating_duration_since(Instant::now())
            .as_secs_f64();
        let (outcome, s) = solve(&enc.cnf, &o)?;
        stats.vars = stats.vars.max(s.vars);
        stats.clauses = stats.clauses.max(s.clauses);
        stats.conflicts += s.conflicts;
        stats.decisions += s.decisions;
        stats.propagations += s.propagations;
        match outcome {
            SolveOutcome::Unsat => {}
            SolveOutcome::Unknown => unknown = true,
            SolveOutcome::Sat(model) => {
                found = Some((enc, model));
                break;
            }
        }
    }
    let status = match found {
        None if unknown => Status::Unknown("solver resource limit reached".into()),
        None => Status::Holds,
        Some((enc, model)) => {
            let mut memo = HashMap::new();
            let mut frames = Vec::with_capacity(spec.k + 1);
            for i in 0..=spec.k {
                let mut f = Valuation::new();
                for (name, sort) in ts
                    .states()
                    .iter()
                    .map(|s| (&s.name, s.sort))
                    .chain(ts.inputs().iter().map(|v| (&v.name, v.sort)))
                {
                    let role = ts.role_of(name).unwrap();
                    let t = Term::var(frame_name(name, i), sort, role);
                    let bits = bb.blast(&t, &mut resolver);
                    f.insert(
                        name.clone(),
                        bits_value(&bb, &bits, &model, &enc, &mut memo),
                    );
                }
                frames.push(f);
            }
            let mut frees = Valuation::new();
            for v in ts.frees() {
                let t = Term::var(&v.name, v.sort, VarRole::Free);
                let bits = bb.blast(&t, &mut resolver);
                frees.insert(
                    v.name.clone(),
                    bits_value(&bb, &bits, &model, &enc, &mut memo),
                );
            }
            let mut cex = Counterexample {
                property: spec.name.clone(),
                k: spec.k,
                frees,
                frames,
                violated: Vec::new(),
                alert: Alert::None,
                diverged: Vec::new(),
            };
            cex.violated = replay(ts, spec, &cex, &assumptions, &commitments)?;
            if spec.instances == 2 {
                classify_divergence(ts, &mut cex);
            }
            Status::Fails(Box::new(cex))
        }
    };
    stats.time = start.elapsed();
    Ok(CheckResult { status, stats })
}

/// Re-simulates the trace and re-evaluates the assumptions and
/// commitments on it. Returns the violated commitment ids.
fn replay(
    ts: &TransitionSystem,
    spec: &PropertySpec,
    cex: &Counterexample,
    assumptions: &[Term],
    commitments: &[(String, Term)],
) -> Result<Vec<String>, EngineError> {
    let state_of = |f: &Valuation| -> Valuation {
        ts.states()
            .iter()
            .map(|s| (s.name.clone(), f[&s.name]))
            .collect()
    };
    for i in 0..spec.k {
        let mut inputs = cex.frames[i].clone();
        inputs.extend(cex.frees.clone());
        let next = ts.simulate_step(&state_of(&cex.frames[i]), &inputs)?;
        if next != state_of(&cex.frames[i + 1]) {
            let bad = next
                .iter()
                .find(|(n, v)| cex.frames[i + 1].get(*n) != Some(v))
                .map(|(n, _)| n.clone())
                .unwrap_or_default();
            return Err(EngineError::Replay(format!(
                "`{}`: frame {} does not follow from frame {i} (first mismatch `{bad}`)",
                spec.name,
                i + 1
            )));
        }
    }
    let flat = cex.flat();
    let mut ev = Evaluator::new(&flat);
    for (j, a) in assumptions.iter().enumerate() {
        if !ev.eval_bool(a)? {
            return Err(EngineError::Replay(format!(
                "`{}`: assumption {j} at offset {} is false on the trace",
                spec.name, spec.assumptions[j].offset
            )));
        }
    }
    let mut violated = Vec::new();
    for (id, c) in commitments {
        if !ev.eval_bool(c)? {
            violated.push(id.clone());
        }
    }
    if violated.is_empty() {
        return Err(EngineError::Replay(format!(
            "`{}`: no commitment is violated",
            spec.name
        )));
    }
    Ok(violated)
}

fn primed(name: &str) -> String {
    format!("{name}'")
}

fn classify_divergence(ts: &TransitionSystem, cex: &mut Counterexample) {
    let mut arch = false;
    let mut uarch = false;
    for (tag, flag) in [("P_arch", &mut arch), ("P_uarch", &mut uarch)] {
        for name in ts.label(tag) {
            if name.ends_with('\'') || ts.state(&primed(name)).is_none() {
                continue;
            }
            for (i, f) in cex.frames.iter().enumerate() {
                if f.get(name) != f.get(&primed(name)) {
                    *flag = true;
                    cex.diverged.push(frame_name(name, i));
                }
            }
        }
    }
    cex.alert = if arch {
        Alert::LAlert
    } else if uarch {
        Alert::PAlert
    } else {
        Alert::None
    };
}

#[derive(Clone, Debug)]
pub struct InvariantResult {
    pub base: CheckResult,
    pub step: CheckResult,
}

impl InvariantResult {
    pub fn holds(&self) -> bool {
        self.base.holds() && self.step.holds()
    }

    /// `"base"` or `"step"` for the first part that did not hold.
    pub fn failed_part(&self) -> Option<&'static str> {
        if !self.base.holds() {
            Some("base")
        } else if !self.step.holds() {
            Some("step")
        } else {
            None
        }
    }
}

/// Proves a per-frame invariant by induction: `base` implies `inv`, and
/// `inv` at offset 0 together with the side conditions implies `inv` at
/// offset 1.
pub fn prove_invariant(
    ts: &TransitionSystem,
    inv: &Term,
    base: &Term,
    side: &[Timed],
    opts: &SolverOptions,
) -> Result<InvariantResult, EngineError> {
    let mut b = PropertySpec::new("invariant-base", PropertyKind::InvariantBase, 1);
    b.assume(0, base.clone()).commit("base", 0, inv.clone());
    let mut s = PropertySpec::new("invariant-step", PropertyKind::User, 1);
    s.assume(0, inv.clone()).commit("step", 1, inv.clone());
    s.assumptions.extend(side.iter().cloned());
    Ok(InvariantResult {
        base: check_interval_property(ts, &b, opts)?,
        step: check_interval_property(ts, &s, opts)?,
    })
}

/// Bit-blasts boolean terms into one CNF asserting all of them. Every
/// variable becomes a symbol of the formula.
pub fn bitblast(constraints: &[Term]) -> Result<CnfFormula, EngineError> {
    for c in constraints {
        if !c.sort().is_bool() {
            return Err(EngineError::BadSpec {
                name: "bitblast".into(),
                msg: format!("constraint of sort {} is not boolean", c.sort()),
            });
        }
    }
    let mut bb = BitBlaster::new();
    let mut enc = CnfEncoder::new();
    let mut none = |_: &str| None;
    for c in constraints {
        let l = bb.blast_bool(c, &mut none);
        enc.assert(&bb.aig, l);
    }
    let mut symbols = BTreeMap::new();
    for name in bb.input_names().to_vec() {
        let bits = bb.input_bits(&name).unwrap().to_vec();
        let vars = bits.iter().map(|&b| enc.lit(&bb.aig, b)).collect();
        symbols.insert(name, vars);
    }
    let mut cnf = enc.cnf;
    cnf.symbols = symbols;
    Ok(cnf)
}

/// Concrete value of a framed term under a counterexample.
pub fn eval_on_trace(cex: &Counterexample, t: &Term) -> Result<u64, EngineError> {
    Ok(eval_term(t, &cex.flat())?)
}

/// Drives `ts` from the first state of `cex` with the inputs recorded in
/// each frame. States missing from the trace start at zero; inputs
/// missing from a frame are zero.
pub fn resimulate(
    ts: &TransitionSystem,
    cex: &Counterexample,
) -> Result<Counterexample, EngineError> {
    let mut out = cex.clone();
    out.frames.clear();
    let mut state: Valuation = ts
        .states()
        .iter()
        .map(|s| {
            (
                s.name.clone(),
                cex.frames
                    .first()
                    .and_then(|f| f.get(&s.name))
                    .copied()
                    .unwrap_or(0),
            )
        })
        .collect();
    for i in 0..=cex.k {
        let mut inputs: Valuation = ts
            .inputs()
            .iter()
            .map(|v| {
                (
                    v.name.clone(),
                    cex.frames
                        .get(i)
                        .and_then(|f| f.get(&v.name))
                        .copied()
                        .unwrap_or(0),
                )
            })
            .collect();
        let mut frame = state.clone();
        frame.extend(inputs.clone());
        out.frames.push(frame);
        if i < cex.k {
            inputs.extend(cex.frees.clone());
            state = ts.simulate_step(&state, &inputs)?;
        }
    }
    Ok(out)
}

/// Whether every assumption of `spec` holds on the trace, and which
/// commitments are violated.
pub fn evaluate_spec(
    ts: &TransitionSystem,
    spec: &PropertySpec,
    cex: &Counterexample,
) -> Result<(bool, Vec<String>), EngineError> {
    let flat = cex.flat();
    let mut ev = Evaluator::new(&flat);
    let mut assumed = true;
    for a in &spec.assumptions {
        assumed &= ev.eval_bool(&at_frame(ts, &a.term, a.offset))?;
    }
    let mut violated = Vec::new();
    for c in &spec.commitments {
        if !ev.eval_bool(&at_frame(ts, &c.term, c.offset))? {
            violated.push(c.id.clone());
        }
    }
    Ok((assumed, violated))
}
