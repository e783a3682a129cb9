use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::eval::{Evaluator, Valuation};
use super::term::{apply_op, Node, Op, Sort, Term, VarRole};
use super::IrError;

#[derive(Clone, Debug)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

#[derive(Clone, Debug)]
pub struct StateVar {
    pub name: String,
    pub sort: Sort,
    /// `None` leaves the initial value unconstrained.
    pub init: Option<Term>,
    pub next: Term,
}

/// State variables with next-state terms, inputs, free symbols, named
/// signal aliases and partition labels. Immutable once built.
#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub name: String,
    states: Vec<StateVar>,
    inputs: Vec<Var>,
    frees: Vec<Var>,
    defines: Vec<(String, Term)>,
    labels: BTreeMap<String, Vec<String>>,
    index: HashMap<String, (VarRole, usize)>,
    define_index: HashMap<String, usize>,
}

impl TransitionSystem {
    pub fn states(&self) -> &[StateVar] {
        &self.states
    }

    pub fn inputs(&self) -> &[Var] {
        &self.inputs
    }

    pub fn frees(&self) -> &[Var] {
        &self.frees
    }

    pub fn defines(&self) -> &[(String, Term)] {
        &self.defines
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<String>> {
        &self.labels
    }

    pub fn label(&self, tag: &str) -> &[String] {
        self.labels.get(tag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn role_of(&self, name: &str) -> Option<VarRole> {
        self.index.get(name).map(|(r, _)| *r)
    }

    pub fn sort_of(&self, name: &str) -> Option<Sort> {
        let (role, i) = *self.index.get(name)?;
        Some(match role {
            VarRole::State => self.states[i].sort,
            VarRole::Input => self.inputs[i].sort,
            VarRole::Free => self.frees[i].sort,
        })
    }

    pub fn state(&self, name: &str) -> Option<&StateVar> {
        match self.index.get(name) {
            Some((VarRole::State, i)) => Some(&self.states[*i]),
            _ => None,
        }
    }

    /// Variable term for a declared state, input or free symbol.
    pub fn var(&self, name: &str) -> Option<Term> {
        let role = self.role_of(name)?;
        Some(Term::var(name, self.sort_of(name)?, role))
    }

    pub fn define(&self, name: &str) -> Option<&Term> {
        self.define_index.get(name).map(|i| &self.defines[*i].1)
    }

    /// Variable or define of that name.
    pub fn signal(&self, name: &str) -> Result<Term, IrError> {
        self.var(name)
            .or_else(|| self.define(name).cloned())
            .ok_or_else(|| IrError::UnknownDefine(name.to_string()))
    }

    /// Next-state valuation from a state and input valuation.
    pub fn simulate_step(
        &self,
        state: &Valuation,
        inputs: &Valuation,
    ) -> Result<Valuation, IrError> {
        let mut all = state.clone();
        for i in &self.inputs {
            let v = *inputs
                .get(&i.name)
                .ok_or_else(|| IrError::MissingVariable(i.name.clone()))?;
            all.insert(i.name.clone(), v);
        }
        for f in &self.frees {
            if let Some(v) = inputs.get(&f.name) {
                all.insert(f.name.clone(), *v);
            }
        }
        for s in &self.states {
            if !state.contains_key(&s.name) {
                return Err(IrError::MissingVariable(s.name.clone()));
            }
        }
        let mut ev = Evaluator::new(&all);
        let mut out = Valuation::new();
        for s in &self.states {
            out.insert(s.name.clone(), ev.eval(&s.next)?);
        }
        Ok(out)
    }

    /// Values of all defines under the combined valuation.
    pub fn eval_defines(&self, vals: &Valuation) -> Result<Valuation, IrError> {
        let mut ev = Evaluator::new(vals);
        let mut out = Valuation::new();
        for (n, t) in &self.defines {
            out.insert(n.clone(), ev.eval(t)?);
        }
        Ok(out)
    }

    /// Initial valuation: declared init values, with `fill` supplying
    /// values for unconstrained states.
    pub fn initial_state(
        &self,
        mut fill: impl FnMut(&StateVar) -> u64,
    ) -> Result<Valuation, IrError> {
        let empty = Valuation::new();
        let mut out = Valuation::new();
        for s in &self.states {
            let v = match &s.init {
                Some(t) => super::eval_term(t, &empty)?,
                None => fill(s) & s.sort.mask(),
            };
            out.insert(s.name.clone(), v);
        }
        Ok(out)
    }

    /// Copy with extra defines and labels added; used to attach property
    /// helper signals without rebuilding the model.
    pub fn with_defines(
        &self,
        extra: Vec<(String, Term)>,
        labels: Vec<(String, String)>,
    ) -> Result<TransitionSystem, IrError> {
        let mut b = TsBuilder::from_system(self);
        for (n, t) in extra {
            b.define(&n, t);
        }
        for (l, n) in labels {
            b.label(&l, &n);
        }
        b.build()
    }

    /// Copy with additional free symbols declared.
    pub fn with_frees(&self, frees: &[(String, Sort)]) -> Result<TransitionSystem, IrError> {
        let mut b = TsBuilder::from_system(self);
        for (n, s) in frees {
            b.free(n, *s);
        }
        b.build()
    }
}

/// Incremental constructor for [`TransitionSystem`].
#[derive(Default)]
pub struct TsBuilder {
    name: String,
    states: Vec<(String, Sort, Option<Term>, Option<Term>)>,
    inputs: Vec<Var>,
    frees: Vec<Var>,
    defines: Vec<(String, Term)>,
    labels: BTreeMap<String, Vec<String>>,
    errors: Vec<IrError>,
    names: HashMap<String, (VarRole, usize)>,
}

impl TsBuilder {
    pub fn new(name: &str) -> Self {
        TsBuilder {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn from_system(ts: &TransitionSystem) -> Self {
        let mut b = TsBuilder::new(&ts.name);
        for s in &ts.states {
            b.state(&s.name, s.sort);
            if let Some(i) = &s.init {
                b.init(&s.name, i.clone());
            }
            b.next(&s.name, s.next.clone());
        }
        for i in &ts.inputs {
            b.input(&i.name, i.sort);
        }
        for f in &ts.frees {
            b.free(&f.name, f.sort);
        }
        for (n, t) in &ts.defines {
            b.define(n, t.clone());
        }
        for (l, ns) in &ts.labels {
            for n in ns {
                b.label(l, n);
            }
        }
        b
    }

    fn declare(&mut self, name: &str, role: VarRole, idx: usize) -> bool {
        if self.names.contains_key(name) || self.defines.iter().any(|(n, _)| n == name) {
            self.errors.push(IrError::Duplicate(name.to_string()));
            return false;
        }
        self.names.insert(name.to_string(), (role, idx));
        true
    }

    pub fn state(&mut self, name: &str, sort: Sort) -> Term {
        if self.declare(name, VarRole::State, self.states.len()) {
            self.states.push((name.to_string(), sort, None, None));
        }
        Term::var(name, sort, VarRole::State)
    }

    pub fn input(&mut self, name: &str, sort: Sort) -> Term {
        if self.declare(name, VarRole::Input, self.inputs.len()) {
            self.inputs.push(Var {
                name: name.to_string(),
                sort,
            });
        }
        Term::var(name, sort, VarRole::Input)
    }

    pub fn free(&mut self, name: &str, sort: Sort) -> Term {
        if self.declare(name, VarRole::Free, self.frees.len()) {
            self.frees.push(Var {
                name: name.to_string(),
                sort,
            });
        }
        Term::var(name, sort, VarRole::Free)
    }

    fn state_slot(&mut self, name: &str) -> Option<usize> {
        match self.names.get(name) {
            Some((VarRole::State, i)) => Some(*i),
            _ => {
                self.errors.push(IrError::Undeclared {
                    name: name.to_string(),
                    var: name.to_string(),
                });
                None
            }
        }
    }

    pub fn next(&mut self, name: &str, t: Term) {
        if let Some(i) = self.state_slot(name) {
            self.states[i].3 = Some(t);
        }
    }

    pub fn init(&mut self, name: &str, t: Term) {
        if let Some(i) = self.state_slot(name) {
            self.states[i].2 = Some(t);
        }
    }

    /// Declares a state with a next term in one call.
    pub fn register(&mut self, name: &str, sort: Sort, init: Option<u64>, next: Term) -> Term {
        let v = self.state(name, sort);
        if let Some(i) = init {
            self.init(name, Term::constant(i, sort));
        }
        self.next(name, next);
        v
    }

    pub fn define(&mut self, name: &str, t: Term) -> Term {
        if self.names.contains_key(name) || self.defines.iter().any(|(n, _)| n == name) {
            self.errors.push(IrError::Duplicate(name.to_string()));
        } else {
            self.defines.push((name.to_string(), t.clone()));
        }
        t
    }

    pub fn label(&mut self, tag: &str, name: &str) {
        let list = self.labels.entry(tag.to_string()).or_default();
        if !list.iter().any(|n| n == name) {
            list.push(name.to_string());
        }
    }

    pub fn build(self) -> Result<TransitionSystem, IrError> {
        if let Some(e) = self.errors.into_iter().next() {
            return Err(e);
        }
        let mut states = Vec::with_capacity(self.states.len());
        for (name, sort, init, next) in self.states {
            sort.validate()?;
            let next = next.ok_or_else(|| IrError::MissingNext(name.clone()))?;
            states.push(StateVar {
                name,
                sort,
                init,
                next,
            });
        }
        let ts = TransitionSystem {
            name: self.name,
            define_index: self
                .defines
                .iter()
                .enumerate()
                .map(|(i, (n, _))| (n.clone(), i))
                .collect(),
            states,
            inputs: self.inputs,
            frees: self.frees,
            defines: self.defines,
            labels: self.labels,
            index: self.names,
        };
        validate(&ts)?;
        Ok(ts)
    }
}

fn check_support(ts: &TransitionSystem, owner: &str, t: &Term) -> Result<(), IrError> {
    for (v, sort, role) in t.support() {
        match ts.index.get(&v) {
            Some((r, _)) if *r == role && ts.sort_of(&v) == Some(sort) => {}
            _ => {
                return Err(IrError::Undeclared {
                    name: owner.to_string(),
                    var: v,
                })
            }
        }
    }
    Ok(())
}

fn validate(ts: &TransitionSystem) -> Result<(), IrError> {
    for s in &ts.states {
        for (t, what) in [(Some(&s.next), "next"), (s.init.as_ref(), "init")] {
            let Some(t) = t else { continue };
            if t.sort() != s.sort {
                return Err(IrError::WrongSort {
                    name: format!("{} ({what})", s.name),
                    expected: s.sort,
                    found: t.sort(),
                });
            }
            check_support(ts, &s.name, t)?;
        }
        if let Some(i) = &s.init {
            if !i.support().is_empty() {
                return Err(IrError::Undeclared {
                    name: s.name.clone(),
                    var: i.support()[0].0.clone(),
                });
            }
        }
    }
    for (n, t) in &ts.defines {
        check_support(ts, n, t)?;
    }
    for (l, names) in &ts.labels {
        for n in names {
            if !ts.index.contains_key(n) && !ts.define_index.contains_key(n) {
                return Err(IrError::UnknownLabelTarget {
                    label: l.clone(),
                    name: n.clone(),
                });
            }
        }
    }
    let p: BTreeSet<&String> = ts.label("P").iter().collect();
    let arch: BTreeSet<&String> = ts.label("P_arch").iter().collect();
    let uarch: BTreeSet<&String> = ts.label("P_uarch").iter().collect();
    if !arch.is_empty() || !uarch.is_empty() {
        if let Some(x) = arch.intersection(&uarch).next() {
            return Err(IrError::BadPartition(format!("`{x}` in both parts")));
        }
        let union: BTreeSet<&String> = arch.union(&uarch).cloned().collect();
        if union != p {
            return Err(IrError::BadPartition("union differs from P".into()));
        }
    }
    for n in p {
        if ts.role_of(n) != Some(VarRole::State) {
            return Err(IrError::BadPartition(format!(
                "`{n}` is not a state variable"
            )));
        }
    }
    Ok(())
}

#[derive(Clone)]
enum Slot {
    Const(u64),
    Var(usize),
    App {
        op: Op,
        sort: Sort,
        arg_sorts: Vec<Sort>,
        args: Vec<usize>,
    },
}

/// Straight-line compilation of a system's next and define terms for fast
/// repeated concrete simulation.
pub struct Simulator {
    slots: Vec<Slot>,
    values: Vec<u64>,
    var_names: Vec<String>,
    var_index: HashMap<String, usize>,
    var_vals: Vec<u64>,
    state_vars: Vec<usize>,
    next_slots: Vec<usize>,
    define_slots: HashMap<String, usize>,
}

impl Simulator {
    pub fn new(ts: &TransitionSystem) -> Simulator {
        let mut var_names = Vec::new();
        let mut var_index = HashMap::new();
        for n in ts
            .states
            .iter()
            .map(|s| &s.name)
            .chain(ts.inputs.iter().map(|i| &i.name))
            .chain(ts.frees.iter().map(|f| &f.name))
        {
            var_index.insert(n.clone(), var_names.len());
            var_names.push(n.clone());
        }
        let mut sim = Simulator {
            slots: Vec::new(),
            values: Vec::new(),
            var_vals: vec![0; var_names.len()],
            state_vars: ts.states.iter().map(|s| var_index[&s.name]).collect(),
            var_names,
            var_index,
            next_slots: Vec::new(),
            define_slots: HashMap::new(),
        };
        let mut memo: HashMap<usize, usize> = HashMap::new();
        for s in &ts.states {
            let slot = sim.compile(&s.next, &mut memo);
            sim.next_slots.push(slot);
        }
        for (n, t) in &ts.defines {
            let slot = sim.compile(t, &mut memo);
            sim.define_slots.insert(n.clone(), slot);
        }
        sim.values = vec![0; sim.slots.len()];
        sim
    }

    fn compile(&mut self, t: &Term, memo: &mut HashMap<usize, usize>) -> usize {
        let mut stack = vec![(t.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if memo.contains_key(&cur.id()) {
                continue;
            }
            let slot = match cur.node() {
                Node::Const { value, .. } => Slot::Const(*value),
                Node::Var { name, .. } => Slot::Var(self.var_index[name.as_ref()]),
                Node::App { op, args, sort } => {
                    if !expanded {
                        stack.push((cur.clone(), true));
                        for a in args {
                            stack.push((a.clone(), false));
                        }
                        continue;
                    }
                    Slot::App {
                        op: *op,
                        sort: *sort,
                        arg_sorts: args.iter().map(Term::sort).collect(),
                        args: args.iter().map(|a| memo[&a.id()]).collect(),
                    }
                }
            };
            memo.insert(cur.id(), self.slots.len());
            self.slots.push(slot);
        }
        memo[&t.id()]
    }

    pub fn set(&mut self, name: &str, value: u64) {
        let i = *self
            .var_index
            .get(name)
            .unwrap_or_else(|| panic!("simulator has no variable `{name}`"));
        self.var_vals[i] = value;
    }

    pub fn get(&self, name: &str) -> u64 {
        self.var_vals[self.var_index[name]]
    }

    /// Index of a variable for [`Simulator::set_at`] and [`Simulator::get_at`].
    pub fn slot_of(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn set_at(&mut self, slot: usize, value: u64) {
        self.var_vals[slot] = value;
    }

    pub fn get_at(&self, slot: usize) -> u64 {
        self.var_vals[slot]
    }

    pub fn load(&mut self, vals: &Valuation) {
        for (n, v) in vals {
            if let Some(i) = self.var_index.get(n) {
                self.var_vals[*i] = *v;
            }
        }
    }

    /// Current values of state variables.
    pub fn state(&self) -> Valuation {
        self.state_vars
            .iter()
            .map(|i| (self.var_names[*i].clone(), self.var_vals[*i]))
            .collect()
    }

    /// Recomputes all signals from the current variable values.
    pub fn evaluate(&mut self) {
        let mut buf = [0u64; 3];
        for i in 0..self.slots.len() {
            let v = match &self.slots[i] {
                Slot::Const(c) => *c,
                Slot::Var(j) => self.var_vals[*j],
                Slot::App {
                    op,
                    sort,
                    arg_sorts,
                    args,
                } => {
                    for (k, a) in args.iter().enumerate() {
                        buf[k] = self.values[*a];
                    }
                    apply_op(*op, *sort, arg_sorts, &buf[..args.len()])
                }
            };
            self.values[i] = v;
        }
    }

    /// Value of a define after the last [`Simulator::evaluate`].
    pub fn signal(&self, name: &str) -> u64 {
        self.values[*self
            .define_slots
            .get(name)
            .unwrap_or_else(|| panic!("simulator has no define `{name}`"))]
    }

    /// Evaluates and then advances every state variable.
    pub fn step(&mut self) {
        self.evaluate();
        for (k, &sv) in self.state_vars.iter().enumerate() {
            self.var_vals[sv] = self.values[self.next_slots[k]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter() -> TransitionSystem {
        let mut b = TsBuilder::new("counter");
        let s = b.state("s", Sort::bv(8));
        b.init("s", Term::bv(0, 8));
        b.next("s", s.add(&Term::bv(1, 8)));
        b.define("wrap", s.equals(&Term::bv(255, 8)));
        b.build().unwrap()
    }

    #[test]
    fn counter_steps() {
        let ts = counter();
        let s0 = ts.initial_state(|_| 0).unwrap();
        let s1 = ts.simulate_step(&s0, &Valuation::new()).unwrap();
        assert_eq!(s1["s"], 1);
        assert_eq!(s1, ts.simulate_step(&s0, &Valuation::new()).unwrap());
    }

    #[test]
    fn free_symbols_are_rigid_inputs() {
        let mut b = TsBuilder::new("rigid");
        let s = b.state("s", Sort::bv(4));
        let f = b.free("f", Sort::bv(4));
        b.next("s", s.add(&f));
        let ts = b.build().unwrap();
        let st: Valuation = [("s".to_string(), 1)].into_iter().collect();
        let inp: Valuation = [("f".to_string(), 3)].into_iter().collect();
        assert_eq!(ts.simulate_step(&st, &inp).unwrap()["s"], 4);
        assert!(ts.simulate_step(&st, &Valuation::new()).is_err());
    }

    #[test]
    fn undeclared_variable_rejected() {
        let mut b = TsBuilder::new("bad");
        let s = b.state("s", Sort::bv(4));
        let ghost = Term::var("ghost", Sort::bv(4), VarRole::Input);
        b.next("s", s.add(&ghost));
        assert!(matches!(b.build(), Err(IrError::Undeclared { .. })));
    }

    #[test]
    fn partition_must_cover_p() {
        let mut b = TsBuilder::new("p");
        let a = b.state("a", Sort::Bool);
        b.next("a", a.clone());
        let c = b.state("c", Sort::Bool);
        b.next("c", c.clone());
        b.label("P", "a");
        b.label("P", "c");
        b.label("P_arch", "a");
        assert!(matches!(b.build(), Err(IrError::BadPartition(_))));
    }

    #[test]
    fn compiled_simulator_matches_step() {
        let ts = counter();
        let mut sim = Simulator::new(&ts);
        sim.set("s", 254);
        sim.evaluate();
        assert_eq!(sim.signal("wrap"), 0);
        sim.step();
        sim.evaluate();
        assert_eq!(sim.signal("wrap"), 1);
        sim.step();
        assert_eq!(sim.get("s"), 0);
    }
}
