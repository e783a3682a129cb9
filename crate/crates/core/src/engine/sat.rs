//! Conflict-driven clause-learning SAT solver.
//!
//! Two watched literals with blockers, VSIDS branching over a binary heap,
//! first-UIP learning with recursive minimization, phase saving, Luby
//! restarts and activity-based learnt clause deletion.

use std::time::Instant;

const UNDEF: u8 = 2;
const NO_REASON: u32 = u32::MAX;

type L = u32;

fn lit_of(x: i32) -> L {
    let v = x.unsigned_abs() - 1;
    (v << 1) | (x < 0) as u32
}

fn var(l: L) -> usize {
    (l >> 1) as usize
}

fn not(l: L) -> L {
    l ^ 1
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// Model indexed by variable; index 0 is unused.
    Sat(Vec<bool>),
    Unsat,
    Unknown,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Limits {
    pub max_conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
}

struct Clause {
    lits: Vec<L>,
    learnt: bool,
    deleted: bool,
    activity: f32,
}

#[derive(Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: L,
}

struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarHeap {
    fn contains(&self, v: usize) -> bool {
        self.pos[v] >= 0
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[p] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i] as usize] = i as i32;
            i = p;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            if act[self.heap[c] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = i as i32;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        let i = self.heap.len() - 1;
        self.pos[v] = i as i32;
        self.up(i, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0] as usize;
        let last = self.heap.pop().unwrap();
        self.pos[top] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }
}

pub struct Solver {
    clauses: Vec<Clause>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watch>>,
    assign: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<L>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f32,
    heap: VarHeap,
    polarity: Vec<bool>,
    seen: Vec<u8>,
    ok: bool,
    max_learnts: f64,
    pub stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(0)
    }
}

impl Solver {
    pub fn new(num_vars: usize) -> Solver {
        let mut s = Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            heap: VarHeap {
                heap: Vec::new(),
                pos: Vec::new(),
            },
            polarity: Vec::new(),
            seen: Vec::new(),
            ok: true,
            max_learnts: 0.0,
            stats: SolverStats::default(),
        };
        s.reserve(num_vars);
        s
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    fn reserve(&mut self, n: usize) {
        while self.assign.len() < n {
            let v = self.assign.len();
            self.assign.push(UNDEF);
            self.level.push(0);
            self.reason.push(NO_REASON);
            self.activity.push(0.0);
            self.polarity.push(true);
            self.seen.push(0);
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            self.heap.pos.push(-1);
            self.heap.insert(v, &self.activity);
        }
    }

    fn value(&self, l: L) -> u8 {
        let a = self.assign[var(l)];
        if a == UNDEF {
            UNDEF
        } else {
            a ^ (l & 1) as u8
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: L, reason: u32) {
        let v = var(l);
        self.assign[v] = (l & 1 == 0) as u8;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Adds a clause of DIMACS-style literals.
    pub fn add_clause(&mut self, clause: &[i32]) {
        if !self.ok {
            return;
        }
        debug_assert_eq!(self.decision_level(), 0);
        let max = clause
            .iter()
            .map(|l| l.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        self.reserve(max);
        let mut lits: Vec<L> = clause.iter().map(|&x| lit_of(x)).collect();
        lits.sort_unstable();
        lits.dedup();
        let mut out = Vec::with_capacity(lits.len());
        for (i, &l) in lits.iter().enumerate() {
            if i + 1 < lits.len() && lits[i + 1] == not(l) {
                return;
            }
            match self.value(l) {
                1 => return,
                0 => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(out[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(out, false);
            }
        }
    }

    fn attach(&mut self, lits: Vec<L>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[not(lits[0]) as usize].push(Watch {
            cref,
            blocker: lits[1],
        });
        self.watches[not(lits[1]) as usize].push(Watch {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = not(p);
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                let c = &mut self.clauses[cref].lits;
                if c[0] == false_lit {
                    c.swap(0, 1);
                }
                let first = c[0];
                let fv = {
                    let a = self.assign[var(first)];
                    if a == UNDEF {
                        UNDEF
                    } else {
                        a ^ (first & 1) as u8
                    }
                };
                if first != w.blocker && fv == 1 {
                    ws[j] = Watch {
                        cref: w.cref,
                        blocker: first,
                    };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.len() {
                    let l = c[k];
                    let a = self.assign[var(l)];
                    if a == UNDEF || a ^ (l & 1) as u8 == 1 {
                        c.swap(1, k);
                        let nw = not(c[1]) as usize;
                        self.watches[nw].push(Watch {
                            cref: w.cref,
                            blocker: first,
                        });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watch {
                    cref: w.cref,
                    blocker: first,
                };
                j += 1;
                if fv == 0 {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        if self.heap.contains(v) {
            let i = self.heap.pos[v] as usize;
            self.heap.up(i, &self.activity);
        }
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn abstract_level(&self, v: usize) -> u32 {
        1 << (self.level[v] & 31)
    }

    fn analyze(&mut self, mut confl: u32) -> (Vec<L>, u32) {
        let mut out: Vec<L> = vec![0];
        let mut path = 0;
        let mut p: Option<L> = None;
        let mut idx = self.trail.len();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = if p.is_some() { 1 } else { 0 };
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = var(q);
                if self.seen[v] == 0 && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = 1;
                    if self.level[v] >= self.decision_level() {
                        path += 1;
                    } else {
                        out.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var(self.trail[idx])] != 0 {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            confl = self.reason[var(pl)];
            self.seen[var(pl)] = 0;
            path -= 1;
            if path == 0 {
                break;
            }
        }
        out[0] = not(p.unwrap());

        // Recursive minimization.
        let mut to_clear: Vec<L> = out.clone();
        let abs = out[1..]
            .iter()
            .fold(0u32, |a, &l| a | self.abstract_level(var(l)));
        let mut j = 1;
        for i in 1..out.len() {
            let l = out[i];
            if self.reason[var(l)] == NO_REASON || !self.redundant(l, abs, &mut to_clear) {
                out[j] = l;
                j += 1;
            }
        }
        out.truncate(j);
        for l in to_clear {
            self.seen[var(l)] = 0;
        }

        let bt = if out.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..out.len() {
                if self.level[var(out[i])] > self.level[var(out[max_i])] {
                    max_i = i;
                }
            }
            out.swap(1, max_i);
            self.level[var(out[1])]
        };
        (out, bt)
    }

    fn redundant(&mut self, p: L, abs: u32, to_clear: &mut Vec<L>) -> bool {
        let mut stack = vec![p];
        let top = to_clear.len();
        while let Some(q) = stack.pop() {
            let r = self.reason[var(q)] as usize;
            let n = self.clauses[r].lits.len();
            for k in 1..n {
                let l = self.clauses[r].lits[k];
                let v = var(l);
                if self.seen[v] == 0 && self.level[v] > 0 {
                    if self.reason[v] != NO_REASON && (self.abstract_level(v) & abs) != 0 {
                        self.seen[v] = 1;
                        stack.push(l);
                        to_clear.push(l);
                    } else {
                        for &c in &to_clear[top..] {
                            self.seen[var(c)] = 0;
                        }
                        to_clear.truncate(top);
                        return false;
                    }
                }
            }
        }
        true
    }

    fn backtrack(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = var(l);
            self.assign[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.polarity[v] = l & 1 == 1;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    fn locked(&self, cref: u32) -> bool {
        let c = &self.clauses[cref as usize];
        let v = var(c.lits[0]);
        self.reason[v] == cref && self.value(c.lits[0]) == 1
    }

    fn reduce_db(&mut self) {
        let mut ls = std::mem::take(&mut self.learnts);
        ls.sort_by(|a, b| {
            let (ca, cb) = (&self.clauses[*a as usize], &self.clauses[*b as usize]);
            (ca.lits.len() <= 2)
                .cmp(&(cb.lits.len() <= 2))
                .then(ca.activity.partial_cmp(&cb.activity).unwrap())
        });
        let half = ls.len() / 2;
        let mut keep = Vec::with_capacity(ls.len());
        let mut removed = false;
        for (i, &cref) in ls.iter().enumerate() {
            let c = &self.clauses[cref as usize];
            if i < half && c.lits.len() > 2 && !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
                removed = true;
            } else {
                keep.push(cref);
            }
        }
        self.learnts = keep;
        if removed {
            let clauses = &self.clauses;
            for ws in self.watches.iter_mut() {
                ws.retain(|w| !clauses[w.cref as usize].deleted);
            }
        }
    }

    fn luby(y: f64, mut x: u64) -> f64 {
        let mut size = 1u64;
        let mut seq = 0u32;
        while size < x + 1 {
            seq += 1;
            size = 2 * size + 1;
        }
        while size - 1 != x {
            size = (size - 1) >> 1;
            seq -= 1;
            x %= size;
        }
        y.powi(seq as i32)
    }

    fn pick_branch(&mut self) -> Option<L> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assign[v] == UNDEF {
                return Some(((v as u32) << 1) | self.polarity[v] as u32);
            }
        }
        None
    }

    fn out_of_budget(&self, limits: &Limits) -> bool {
        if let Some(m) = limits.max_conflicts {
            if self.stats.conflicts >= m {
                return true;
            }
        }
        if let Some(d) = limits.deadline {
            if Instant::now() >= d {
                return true;
            }
        }
        false
    }

    pub fn solve(&mut self, limits: Limits) -> SolveOutcome {
        if !self.ok {
            return SolveOutcome::Unsat;
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SolveOutcome::Unsat;
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(5000.0);
        let mut restart = 0u64;
        loop {
            let budget = (Self::luby(2.0, restart) * 100.0) as u64;
            restart += 1;
            self.stats.restarts += 1;
            match self.search(budget, &limits) {
                Some(true) => {
                    let mut model = vec![false; self.num_vars() + 1];
                    for v in 0..self.num_vars() {
                        model[v + 1] = self.assign[v] == 1;
                    }
                    self.backtrack(0);
                    return SolveOutcome::Sat(model);
                }
                Some(false) => {
                    self.ok = false;
                    return SolveOutcome::Unsat;
                }
                None => {
                    if self.out_of_budget(&limits) {
                        self.backtrack(0);
                        return SolveOutcome::Unknown;
                    }
                }
            }
        }
    }

    /// `Some(true)` sat, `Some(false)` unsat, `None` restart or budget.
    fn search(&mut self, budget: u64, limits: &Limits) -> Option<bool> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                local += 1;
                if self.decision_level() == 0 {
                    return Some(false);
                }
                let (learnt, bt) = self.analyze(confl);
                self.backtrack(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(first, cref);
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
                if self.stats.conflicts.is_multiple_of(256) && self.out_of_budget(limits) {
                    self.backtrack(0);
                    return None;
                }
            } else {
                if local >= budget {
                    self.backtrack(0);
                    return None;
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                    self.max_learnts *= 1.1;
                }
                self.stats.decisions += 1;
                if self.stats.decisions.is_multiple_of(4096) && self.out_of_budget(limits) {
                    self.backtrack(0);
                    return None;
                }
                match self.pick_branch() {
                    None => return Some(true),
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, NO_REASON);
                    }
                }
            }
        }
    }
}

/// Solves a clause list in one call.
pub fn solve_clauses(
    num_vars: u32,
    clauses: &[Vec<i32>],
    limits: Limits,
) -> (SolveOutcome, SolverStats) {
    let mut s = Solver::new(num_vars as usize);
    for c in clauses {
        s.add_clause(c);
    }
    let r = s.solve(limits);
    (r, s.stats)
}
