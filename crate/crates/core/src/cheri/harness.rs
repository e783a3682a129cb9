//! Cycle-level driver for the pipelined model with a concrete memory.

use crate::ir::{Simulator, TransitionSystem};

use super::capability::{Capability, Perms, FIELDS};
use super::config::CoreConfig;
use super::iss::{Beat, CoreState, Memory};

/// Everything observable in one clock cycle.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleEvents {
    pub fetch: Option<u64>,
    pub data: Option<Beat>,
    /// An instruction left the execute stage.
    pub retired: Option<u64>,
    pub trap: bool,
}

pub struct PipelineHarness {
    pub cfg: CoreConfig,
    pub sim: Simulator,
    pub mem: Memory,
    /// Level driven on the protection-enable pin.
    pub pin: bool,
}

impl PipelineHarness {
    pub fn new(cfg: &CoreConfig, ts: &TransitionSystem) -> PipelineHarness {
        let mut h = PipelineHarness {
            cfg: cfg.clone(),
            sim: Simulator::new(ts),
            mem: Memory::new(cfg.addr_w),
            pin: cfg.documented_enable_level(),
        };
        h.reset();
        h
    }

    /// Applies the reset input for one cycle.
    pub fn reset(&mut self) {
        self.sim.set("reset", 1);
        self.sim.step();
        self.sim.set("reset", 0);
    }

    fn set_cap(&mut self, loc: &str, c: &Capability) {
        let vals = [
            c.tag as u64,
            c.perms.0 as u64,
            c.base,
            c.top,
            c.addr,
            c.otype as u64,
        ];
        for (f, v) in FIELDS.iter().zip(vals) {
            self.sim.set(&format!("{loc}.{f}"), v);
        }
    }

    pub fn get_cap(&self, loc: &str) -> Capability {
        let g = |f: &str| self.sim.get(&format!("{loc}.{f}"));
        Capability {
            tag: g("tag") != 0,
            perms: Perms(g("perms") as u8),
            base: g("base"),
            top: g("top"),
            addr: g("addr"),
            otype: g("otype") as u8,
        }
    }

    /// Installs an architectural state with empty pipeline buffers.
    pub fn load_state(&mut self, s: &CoreState) {
        for (i, r) in s.regs.iter().enumerate() {
            self.set_cap(&format!("r{i}"), r);
        }
        self.set_cap("scr0", &s.scr[0]);
        self.set_cap("scr1", &s.scr[1]);
        self.set_cap("pcc", &s.pcc);
        self.sim.set("cycle", s.cycle);
        self.sim.set("exc", s.exc as u64);
        for v in [
            "fb.valid", "fb.fault", "ex.beat", "ex.delay", "wb.valid", "ld.tag",
        ] {
            self.sim.set(v, 0);
        }
    }

    /// Architectural view: pending writeback applied, PC taken from the
    /// instruction waiting in the fetch buffer.
    pub fn arch_state(&self) -> CoreState {
        let mut regs: Vec<Capability> = (0..self.cfg.num_regs)
            .map(|i| self.get_cap(&format!("r{i}")))
            .collect();
        if self.sim.get("wb.valid") != 0 {
            regs[self.sim.get("wb.rd") as usize] = self.get_cap("wb");
        }
        let mut pcc = self.get_cap("pcc");
        if self.sim.get("fb.valid") != 0 {
            pcc.addr = self.sim.get("fb.pc");
        }
        CoreState {
            regs,
            pcc,
            scr: [self.get_cap("scr0"), self.get_cap("scr1")],
            cycle: self.sim.get("cycle"),
            exc: self.sim.get("exc") != 0,
        }
    }

    /// Runs one clock cycle. `corrupt` can replace the word returned for
    /// the instruction fetch.
    pub fn cycle_with(&mut self, corrupt: Option<u64>) -> CycleEvents {
        self.sim.set("cheri_en", self.pin as u64);
        self.sim.evaluate();
        let mut ev = CycleEvents::default();
        if self.sim.signal("iport.valid") != 0 {
            let a = self.sim.signal("iport.addr");
            ev.fetch = Some(a);
            let w = corrupt.unwrap_or_else(|| self.mem.read(a).0);
            self.sim.set("iport.rdata", w);
        }
        if self.sim.signal("dport.valid") != 0 {
            let a = self.sim.signal("dport.addr");
            let (w, t) = self.mem.read(a);
            self.sim.set("dport.rdata", w);
            self.sim.set("dport.rtag", t as u64);
            let beat = Beat {
                write: self.sim.signal("dport.we") != 0,
                addr: a,
                wdata: self.sim.signal("dport.wdata"),
                wtag: self.sim.signal("dport.wtag") != 0,
            };
            ev.data = Some(beat);
        }
        self.sim.evaluate();
        if self.sim.signal("ex.done") != 0 {
            ev.retired = Some(self.sim.get("fb.pc"));
            ev.trap = self.sim.signal("ex.trap") != 0;
        }
        if let Some(b) = &ev.data {
            self.mem.apply(b);
        }
        self.sim.step();
        ev
    }

    pub fn cycle(&mut self) -> CycleEvents {
        self.cycle_with(None)
    }

    /// Cycles until an instruction retires, collecting data beats on the
    /// way. Gives up after `limit` cycles.
    pub fn run_instruction(&mut self, limit: usize) -> Option<(u64, Vec<Beat>, bool)> {
        let mut beats = Vec::new();
        for _ in 0..limit {
            let ev = self.cycle();
            beats.extend(ev.data);
            if let Some(pc) = ev.retired {
                return Some((pc, beats, ev.trap));
            }
        }
        None
    }
}
