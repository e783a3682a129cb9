use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::{
    check_interval_property, trace_json, Alert, CheckResult, Counterexample, PropertySpec,
    SolverOptions, Status,
};
use crate::ir::{split_frame_name, TransitionSystem};
use crate::props::{
    attach_symbolic_address, base_spec, catalogue, port_locations, prop_confidentiality,
    prop_integrity, prop_monotonicity, prop_upec_step, upec_on, CapLocation, Miter, ProtectedSet,
    SymbolicAddress, UpecOptions,
};

use super::classify::{
    classify_counterexample, refine_protected_set, variant_clears, ClassOverride, Classification,
};
use super::design::Design;
use super::FlowError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOptions {
    /// Window of the leakage check.
    pub k_upec: usize,
    /// Maximum number of integrity and monotonicity checks.
    pub iteration_cap: usize,
    /// Let confidentiality counterexamples refine the protected set.
    pub refine_on_confidentiality: bool,
    /// Order in which locations are tried as refinement candidates;
    /// catalogue order when empty.
    pub candidate_order: Vec<String>,
    pub classification_override: Option<ClassOverride>,
    /// After a true bug, try to attribute it to a single defect toggle
    /// and continue with that toggle off.
    pub diagnose_toggles: bool,
    pub solver: SolverOptions,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            k_upec: 4,
            iteration_cap: 32,
            refine_on_confidentiality: false,
            candidate_order: Vec::new(),
            classification_override: None,
            diagnose_toggles: true,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    IntegrityViolation,
    ConfidentialityViolation,
    MonotonicityViolation,
    TimingSideChannel,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::IntegrityViolation => "integrity-violation",
            FindingKind::ConfidentialityViolation => "confidentiality-violation",
            FindingKind::MonotonicityViolation => "monotonicity-violation",
            FindingKind::TimingSideChannel => "timing-side-channel",
        }
    }
}

fn cex_json<S: serde::Serializer>(c: &Counterexample, s: S) -> Result<S::Ok, S::Error> {
    trace_json(c).serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub property: String,
    /// Defect toggle whose removal clears the counterexample.
    pub toggle: Option<String>,
    pub summary: String,
    #[serde(serialize_with = "cex_json")]
    pub counterexample: Counterexample,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogEntry {
    pub property: String,
    /// Count of runs of this property so far, from 1.
    pub iteration: usize,
    pub result: String,
    pub classification: Option<String>,
    /// Solver conflicts spent on the check.
    pub effort: u64,
    #[serde(skip)]
    pub wall: Duration,
    pub description: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Secure,
    Vulnerable,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowState {
    pub design: String,
    pub protected_set: ProtectedSet,
    pub log: Vec<LogEntry>,
    pub findings: Vec<Finding>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

impl FlowState {
    pub fn runs_of(&self, property: &str) -> impl Iterator<Item = &LogEntry> {
        let p = property.to_string();
        self.log.iter().filter(move |e| e.property == p)
    }

    pub fn total_wall(&self) -> Duration {
        self.log.iter().map(|e| e.wall).sum()
    }
}

enum Outcome {
    Held,
    Failed(Box<Counterexample>),
    Stopped,
}

struct Runner<'a, D: Design> {
    design: D,
    ts: TransitionSystem,
    sa: SymbolicAddress,
    opts: &'a FlowOptions,
    order: Vec<CapLocation>,
    state: FlowState,
    checks: usize,
    inconclusive: bool,
}

impl<'a, D: Design> Runner<'a, D> {
    fn rebuild(&mut self) -> Result<(), FlowError> {
        let (ts, sa) = attach_symbolic_address(&self.design.build()?)?;
        self.ts = ts;
        self.sa = sa;
        self.state.design = self.design.label();
        Ok(())
    }

    fn log(
        &mut self,
        property: &str,
        r: Option<&CheckResult>,
        wall: Duration,
        description: String,
    ) -> usize {
        let iteration = self.state.runs_of(property).count() + 1;
        self.state.log.push(LogEntry {
            property: property.to_string(),
            iteration,
            result: r.map_or("error", |r| r.verdict()).to_string(),
            classification: None,
            effort: r.map_or(0, |r| r.stats.conflicts),
            wall,
            description,
        });
        self.state.log.len() - 1
    }

    fn classify_at(&mut self, entry: usize, class: &str) {
        self.state.log[entry].classification = Some(class.to_string());
    }

    /// Runs one check and logs it. Errors and unknown results end the run
    /// as inconclusive.
    fn run(&mut self, ts: &TransitionSystem, spec: &PropertySpec, what: &str) -> (Outcome, usize) {
        let start = Instant::now();
        match check_interval_property(ts, spec, &self.opts.solver) {
            Ok(r) => {
                let desc = match &r.status {
                    Status::Holds => what.to_string(),
                    Status::Fails(c) => format!("{what}; violated {}", c.violated.join(", ")),
                    Status::Unknown(why) => format!("{what}; {why}"),
                };
                let e = self.log(&spec.name, Some(&r), start.elapsed(), desc);
                match r.status {
                    Status::Holds => (Outcome::Held, e),
                    Status::Fails(c) => (Outcome::Failed(c), e),
                    Status::Unknown(_) => {
                        self.inconclusive = true;
                        (Outcome::Stopped, e)
                    }
                }
            }
            Err(err) => {
                let e = self.log(&spec.name, None, start.elapsed(), format!("{what}; {err}"));
                self.inconclusive = true;
                (Outcome::Stopped, e)
            }
        }
    }

    fn classify(&self, cex: &Counterexample) -> Result<Classification, FlowError> {
        let found = classify_counterexample(
            &self.ts,
            &self.sa,
            cex,
            &self.state.protected_set,
            &self.order,
        )?;
        Ok(match (self.opts.classification_override, found) {
            (Some(ClassOverride::TrueBug), _) => Classification::TrueBug,
            (Some(ClassOverride::FalseCex), Classification::TrueBug) => {
                return Err(FlowError::Precondition(
                    "classification forced to false-cex but no candidate location is left".into(),
                ))
            }
            (_, c) => c,
        })
    }

    fn refine(&mut self, entry: usize, loc: &CapLocation) -> Result<bool, FlowError> {
        self.classify_at(entry, &format!("false-cex: {}", loc.name));
        self.state.protected_set = refine_protected_set(&self.state.protected_set, loc)?;
        self.base()
    }

    /// Induction base for the current protected set.
    fn base(&mut self) -> Result<bool, FlowError> {
        let entry = self.design.task_entry(&self.ts, &self.sa)?;
        let spec = base_spec(&self.ts, &self.state.protected_set, &self.sa, &entry)?;
        let ts = self.ts.clone();
        match self.run(&ts, &spec, "task entry implies the protected-set predicate") {
            (Outcome::Held, _) => Ok(true),
            (Outcome::Failed(c), e) => {
                self.classify_at(e, "true-bug");
                let summary = format!(
                    "the task is entered holding a capability to the protected address ({})",
                    c.violated.join(", ")
                );
                self.finding(FindingKind::IntegrityViolation, &spec, None, summary, *c);
                Ok(false)
            }
            (Outcome::Stopped, _) => Ok(false),
        }
    }

    fn finding(
        &mut self,
        kind: FindingKind,
        spec: &PropertySpec,
        toggle: Option<String>,
        summary: String,
        cex: Counterexample,
    ) {
        self.state.findings.push(Finding {
            kind,
            property: spec.name.clone(),
            toggle,
            summary,
            counterexample: cex,
        });
    }

    /// The single active toggle whose removal clears `cex`, rebuilding
    /// `spec` on each variant with `make`.
    fn diagnose(
        &self,
        cex: &Counterexample,
        make: &dyn Fn(
            &TransitionSystem,
            &ProtectedSet,
            &SymbolicAddress,
        ) -> Result<PropertySpec, FlowError>,
    ) -> Result<Option<String>, FlowError> {
        if !self.opts.diagnose_toggles {
            return Ok(None);
        }
        for t in self.design.active_toggles() {
            let (ts, sa) = attach_symbolic_address(&self.design.without(&t).build()?)?;
            let spec = make(&ts, &self.state.protected_set, &sa)?;
            if variant_clears(&ts, &spec, cex)? {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    fn budget_left(&mut self) -> bool {
        if self.checks >= self.opts.iteration_cap {
            self.state.notes.push(format!(
                "iteration cap of {} checks reached",
                self.opts.iteration_cap
            ));
            self.inconclusive = true;
            return false;
        }
        self.checks += 1;
        true
    }

    /// Integrity and monotonicity with refinement. Returns false when the
    /// run must stop.
    fn protection_loop(&mut self) -> Result<bool, FlowError> {
        let mut proven: Option<ProtectedSet> = None;
        loop {
            if !self.budget_left() {
                return Ok(false);
            }
            let spec = prop_integrity(&self.ts, &self.state.protected_set, &self.sa)?;
            let ts = self.ts.clone();
            let (out, e) = self.run(&ts, &spec, "no write request reaches the protected address");
            match out {
                Outcome::Stopped => return Ok(false),
                Outcome::Held if proven.as_ref() == Some(&self.state.protected_set) => {
                    return Ok(true)
                }
                Outcome::Held => {}
                Outcome::Failed(c) => match self.classify(&c)? {
                    Classification::FalseCex { candidate } => {
                        if !self.refine(e, &candidate)? {
                            return Ok(false);
                        }
                    }
                    Classification::TrueBug => {
                        self.classify_at(e, "true-bug");
                        let toggle =
                            self.diagnose(&c, &|ts, ps, sa| Ok(prop_integrity(ts, ps, sa)?))?;
                        let summary = format!(
                            "write request to the protected address {:#x} while the protected-set predicate holds",
                            c.frees.get(&self.sa.name).copied().unwrap_or(0)
                        );
                        self.finding(
                            FindingKind::IntegrityViolation,
                            &spec,
                            toggle.clone(),
                            summary,
                            *c,
                        );
                        match toggle {
                            Some(t) => {
                                self.switch_off(&t)?;
                                proven = None;
                                continue;
                            }
                            None => return Ok(false),
                        }
                    }
                },
            }
            // Monotonicity until it holds for the current set.
            loop {
                if !self.budget_left() {
                    return Ok(false);
                }
                let spec = prop_monotonicity(&self.ts, &self.state.protected_set, &self.sa)?;
                let ts = self.ts.clone();
                let (out, e) =
                    self.run(&ts, &spec, "one step preserves the protected-set predicate");
                match out {
                    Outcome::Stopped => return Ok(false),
                    Outcome::Held => {
                        proven = Some(self.state.protected_set.clone());
                        break;
                    }
                    Outcome::Failed(c) => match self.classify(&c)? {
                        Classification::FalseCex { candidate } => {
                            if !self.refine(e, &candidate)? {
                                return Ok(false);
                            }
                        }
                        Classification::TrueBug => {
                            self.classify_at(e, "true-bug");
                            let toggle = self
                                .diagnose(&c, &|ts, ps, sa| Ok(prop_monotonicity(ts, ps, sa)?))?;
                            let summary = format!(
                                "a capability to the protected address appears in {}",
                                c.violated.join(", ")
                            );
                            self.finding(
                                FindingKind::MonotonicityViolation,
                                &spec,
                                toggle.clone(),
                                summary,
                                *c,
                            );
                            match toggle {
                                Some(t) => {
                                    self.switch_off(&t)?;
                                    proven = None;
                                    break;
                                }
                                None => return Ok(false),
                            }
                        }
                    },
                }
            }
        }
    }

    fn switch_off(&mut self, toggle: &str) -> Result<(), FlowError> {
        self.design = self.design.without(toggle);
        self.rebuild()?;
        self.state
            .notes
            .push(format!("continuing with `{toggle}` switched off"));
        Ok(())
    }

    /// Confidentiality per port, with the leakage check on failure.
    /// Returns `Some(true)` when a refinement requires another round of
    /// the protection loop.
    fn confidentiality(&mut self) -> Result<Option<bool>, FlowError> {
        let specs = prop_confidentiality(&self.ts, &self.state.protected_set, &self.sa)?;
        let mut leakage: Option<Option<(Counterexample, PropertySpec)>> = None;
        for spec in specs {
            let ts = self.ts.clone();
            let (out, e) = self.run(&ts, &spec, "no read request reaches the protected address");
            let c = match out {
                Outcome::Stopped => return Ok(None),
                Outcome::Held => continue,
                Outcome::Failed(c) => c,
            };
            if self.opts.refine_on_confidentiality {
                if let Classification::FalseCex { candidate } = self.classify(&c)? {
                    if !self.refine(e, &candidate)? {
                        return Ok(None);
                    }
                    return Ok(Some(true));
                }
            }
            if leakage.is_none() {
                match self.leakage()? {
                    None => return Ok(None),
                    Some(r) => leakage = Some(r),
                }
            }
            match leakage.as_ref().unwrap() {
                None => {
                    self.classify_at(e, "access-without-propagation");
                    self.state.notes.push(format!(
                        "{}: access without propagation; the protected address is read but the leakage check holds",
                        spec.name
                    ));
                }
                Some((lc, lspec)) => {
                    self.classify_at(e, "true-bug");
                    let port = spec.name.trim_start_matches("confidentiality-").to_string();
                    let toggle = self.diagnose(&c, &|ts, ps, sa| {
                        prop_confidentiality(ts, ps, sa)?
                            .into_iter()
                            .find(|s| s.name == spec.name)
                            .ok_or_else(|| FlowError::Design(format!("variant lost port `{port}`")))
                    })?;
                    let (lc, lspec) = (lc.clone(), lspec.clone());
                    let Some((kind, lc, lspec)) = self.leak_kind(lc, lspec)? else {
                        return Ok(None);
                    };
                    let summary = match kind {
                        FindingKind::TimingSideChannel => {
                            let t = self.timed_divergence(&lc);
                            format!(
                                "read through {port}; {} differs at cycle {} depending on the protected contents",
                                t.1.join(", "),
                                t.0
                            )
                        }
                        _ => {
                            let (f, names) = first_divergence(&lc);
                            format!(
                                "read through {port}; {} differs at cycle {f} depending on the protected contents",
                                names.join(", ")
                            )
                        }
                    };
                    self.finding(kind, &lspec, toggle, summary, lc);
                }
            }
        }
        Ok(Some(false))
    }

    /// Leakage check for the current set: `Some(None)` when it holds,
    /// `Some(Some(cex))` on an architectural divergence. The one-cycle
    /// step is tried first; the windowed check runs only if it fails.
    fn leakage(&mut self) -> Result<Option<Option<(Counterexample, PropertySpec)>>, FlowError> {
        let m = Miter::build(&self.ts, &self.sa)?;
        let step = prop_upec_step(&m, &self.state.protected_set)?;
        let (out, e) = self.run(
            &m.product,
            &step,
            "equal processor states stay equal for one cycle",
        );
        let step_cex = match out {
            Outcome::Stopped => return Ok(None),
            Outcome::Held => {
                self.classify_at(e, "holds for every window");
                return Ok(Some(None));
            }
            Outcome::Failed(c) => c,
        };
        let uopts = UpecOptions {
            k: self.opts.k_upec,
            observe: None,
        };
        let spec = upec_on(&m, &self.state.protected_set, &uopts)?;
        let (out, e) = self.run(
            &m.product,
            &spec,
            "protected memory does not reach architectural state",
        );
        match out {
            Outcome::Stopped => Ok(None),
            Outcome::Failed(c) => {
                self.classify_at(e, "l-alert");
                Ok(Some(Some((*c, spec))))
            }
            Outcome::Held => {
                if step_cex.alert == Alert::PAlert {
                    let (f, names) = first_divergence(&step_cex);
                    self.state.notes.push(format!(
                        "p-alert: microarchitectural state can depend on protected memory ({} at cycle {f})",
                        names.join(", ")
                    ));
                }
                Ok(Some(None))
            }
        }
    }
}

impl<'a, D: Design> Runner<'a, D> {
    /// Earliest divergence of a `timing`-labelled state.
    fn timed_divergence(&self, c: &Counterexample) -> (usize, Vec<String>) {
        let timing = self.ts.label("timing");
        let mut only = c.clone();
        only.diverged.retain(|d| {
            timing.contains(&split_frame_name(d).map_or(d.clone(), |(n, _)| n.to_string()))
        });
        first_divergence(&only)
    }

    /// A leak is a timing channel when a `timing`-labelled state can
    /// diverge. If the trace at hand does not show it, a check observing
    /// only those states decides.
    fn leak_kind(
        &mut self,
        c: Counterexample,
        spec: PropertySpec,
    ) -> Result<Option<(FindingKind, Counterexample, PropertySpec)>, FlowError> {
        let timing: Vec<String> = self.ts.label("timing").to_vec();
        if timing.is_empty() {
            return Ok(Some((FindingKind::ConfidentialityViolation, c, spec)));
        }
        if !self.timed_divergence(&c).1.is_empty() {
            return Ok(Some((FindingKind::TimingSideChannel, c, spec)));
        }
        let m = Miter::build(&self.ts, &self.sa)?;
        let uopts = UpecOptions {
            k: self.opts.k_upec,
            observe: Some(timing),
        };
        let mut tspec = upec_on(&m, &self.state.protected_set, &uopts)?;
        tspec.name = "upec-timing".into();
        let (out, e) = self.run(
            &m.product,
            &tspec,
            "protected memory does not reach the timing observables",
        );
        Ok(match out {
            Outcome::Stopped => None,
            Outcome::Failed(t) => {
                self.classify_at(e, "l-alert");
                Some((FindingKind::TimingSideChannel, *t, tspec))
            }
            Outcome::Held => Some((FindingKind::ConfidentialityViolation, c, spec)),
        })
    }
}

/// Earliest cycle with a divergence and the states differing there.
fn first_divergence(c: &Counterexample) -> (usize, Vec<String>) {
    let mut best: Option<(usize, Vec<String>)> = None;
    for d in &c.diverged {
        let (name, frame) = split_frame_name(d).unwrap_or((d.as_str(), 0));
        match &mut best {
            Some((f, names)) if *f == frame => names.push(name.to_string()),
            Some((f, _)) if *f < frame => {}
            _ => best = Some((frame, vec![name.to_string()])),
        }
    }
    best.unwrap_or((0, Vec::new()))
}

/// Candidate order: named locations first, in the given order, then the
/// rest of the catalogue and the ports.
fn candidate_order(ts: &TransitionSystem, names: &[String]) -> Result<Vec<CapLocation>, FlowError> {
    let all: Vec<CapLocation> = catalogue(ts)
        .into_iter()
        .chain(port_locations(ts))
        .collect();
    let mut out = Vec::new();
    for n in names {
        let loc = all.iter().find(|l| &l.name == n).ok_or_else(|| {
            FlowError::Design(format!("unknown location `{n}` in candidate order"))
        })?;
        if !out.contains(loc) {
            out.push(loc.clone());
        }
    }
    for l in all {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    Ok(out)
}

/// Runs the verification flow from `initial`. The capability-carrying
/// memory ports are always part of the protected set.
pub fn run_flow<D: Design>(
    design: &D,
    initial: &ProtectedSet,
    opts: &FlowOptions,
) -> Result<FlowState, FlowError> {
    let (ts, sa) = attach_symbolic_address(&design.build()?)?;
    let mut ps = initial.clone();
    for p in port_locations(&ts) {
        if !ps.contains(&p.name) {
            ps.insert(p)?;
        }
    }
    ps.validate(&ts)?;
    let order = candidate_order(&ts, &opts.candidate_order)?;
    let mut r = Runner {
        design: design.clone(),
        state: FlowState {
            design: design.label(),
            protected_set: ps,
            log: Vec::new(),
            findings: Vec::new(),
            notes: Vec::new(),
            verdict: Verdict::Inconclusive,
        },
        ts,
        sa,
        opts,
        order,
        checks: 0,
        inconclusive: false,
    };
    if r.base()? {
        loop {
            let protected = r.protection_loop()?;
            if r.inconclusive {
                break;
            }
            if !protected && r.state.findings.is_empty() {
                break;
            }
            match r.confidentiality()? {
                Some(true) => continue,
                _ => break,
            }
        }
    }
    r.state.verdict = if !r.state.findings.is_empty() {
        Verdict::Vulnerable
    } else if r.inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Secure
    };
    Ok(r.state)
}
