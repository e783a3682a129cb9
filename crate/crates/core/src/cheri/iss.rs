//! Architectural simulator: one instruction per call, all checks applied.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use super::capability::{
    check_access, derive_and_perm, derive_set_bounds, Capability, Perms, OTYPE_SENTRY,
    OTYPE_UNSEALED,
};
use super::config::CoreConfig;
use super::isa::{alu, sys, DecodeError, Instruction, Kind, BEQ};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoreState {
    pub regs: Vec<Capability>,
    pub pcc: Capability,
    pub scr: [Capability; 2],
    pub cycle: u64,
    pub exc: bool,
}

impl CoreState {
    /// State right after reset.
    pub fn reset(cfg: &CoreConfig) -> CoreState {
        CoreState {
            regs: vec![Capability::default(); cfg.num_regs as usize],
            pcc: Capability::almighty(cfg.addr_w),
            scr: [Capability::default(); 2],
            cycle: 0,
            exc: false,
        }
    }

    pub fn pc(&self) -> u64 {
        self.pcc.addr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Exception {
    FetchFault,
    Illegal,
    AccessFault,
    JumpFault,
    Ecall,
}

/// One port transaction of four bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Beat {
    pub write: bool,
    pub addr: u64,
    pub wdata: u64,
    pub wtag: bool,
}

impl Beat {
    pub fn read(addr: u64) -> Beat {
        Beat {
            write: false,
            addr,
            wdata: 0,
            wtag: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub state: CoreState,
    /// Data-port beats in issue order.
    pub data: Vec<Beat>,
    pub exception: Option<Exception>,
    /// Control passed to another protection domain.
    pub context_switch: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IssError {
    #[error("malformed instruction: {0}")]
    Malformed(#[from] DecodeError),
}

/// Word-addressed memory with one tag bit per word. Unwritten words read
/// as zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    words: HashMap<u64, (u64, bool)>,
    pub addr_mask: u64,
}

impl Memory {
    pub fn new(addr_w: u32) -> Memory {
        Memory {
            words: HashMap::new(),
            addr_mask: (1 << addr_w) - 1,
        }
    }

    pub fn read(&self, addr: u64) -> (u64, bool) {
        self.words
            .get(&(addr & self.addr_mask))
            .copied()
            .unwrap_or((0, false))
    }

    pub fn write(&mut self, addr: u64, data: u64, tag: bool) {
        self.words
            .insert(addr & self.addr_mask, (data & 0xffff_ffff, tag));
    }

    pub fn apply(&mut self, b: &Beat) {
        if b.write {
            self.write(b.addr, b.wdata, b.wtag);
        }
    }

    pub fn load_program(&mut self, base: u64, prog: &[Instruction]) {
        for (i, ins) in prog.iter().enumerate() {
            self.write(base + 4 * i as u64, ins.encode() as u64, false);
        }
    }
}

fn sext_imm(imm: i32, mask: u64) -> u64 {
    (imm as i64 as u64) & mask
}

fn trap(s: &mut CoreState, pc: u64) {
    s.scr[1] = s.pcc.with_addr(pc);
    s.pcc = s.scr[0];
    s.pcc.otype = OTYPE_UNSEALED;
    s.exc = true;
}

/// Executes one decoded instruction at `s.pcc.addr`. The fetch check is
/// the caller's concern. `mem` answers data-port reads.
pub fn iss_step(
    cfg: &CoreConfig,
    prot: bool,
    s: &CoreState,
    ins: &Instruction,
    mem: &dyn Fn(u64) -> (u64, bool),
) -> Result<StepOutcome, IssError> {
    ins.validate(cfg.num_regs)?;
    let m = cfg.addr_mask();
    let mut n = s.clone();
    let pc = s.pc();
    let next_pc = (pc + 4) & m;
    let rs1 = s.regs[ins.rs1 as usize];
    let rs2 = s.regs[ins.rs2 as usize];
    let imm = sext_imm(ins.imm, m);
    let ea = (rs1.addr + imm) & m;
    let allowed = |size: u64, need: Perms| !prot || check_access(&rs1, ea, size, need, cfg.addr_w);
    let cap_size = if cfg.bug_capstore_second_beat { 4 } else { 8 };
    let mut data = Vec::new();
    let mut exception = None;
    let mut switch = false;
    let mut latency = 1;
    let mut npc = Some(next_pc);
    let mut rd_val = None;
    match ins.kind {
        Kind::Alu => {
            let (a, b) = (rs1.addr, rs2.addr);
            let v = match ins.funct {
                alu::ADD => a + b,
                alu::SUB => a.wrapping_sub(b),
                alu::AND => a & b,
                alu::OR => a | b,
                alu::XOR => a ^ b,
                alu::SLTU => (a < b) as u64,
                alu::ADDI => a + imm,
                _ => imm,
            };
            rd_val = Some(Capability::int(v & m));
        }
        Kind::Load => {
            if allowed(4, Perms::R) {
                data.push(Beat::read(ea));
                rd_val = Some(Capability::int(mem(ea).0 & m));
            } else {
                exception = Some(Exception::AccessFault);
            }
        }
        Kind::Store => {
            if allowed(4, Perms::W) {
                data.push(Beat {
                    write: true,
                    addr: ea,
                    wdata: rs2.addr,
                    wtag: false,
                });
            } else {
                exception = Some(Exception::AccessFault);
            }
        }
        Kind::CLoadCap => {
            if allowed(cap_size, Perms::R | Perms::LOAD_CAP) {
                let a1 = (ea + 4) & m;
                data.push(Beat::read(ea));
                data.push(Beat::read(a1));
                let (w0, t0) = mem(ea);
                let (w1, t1) = mem(a1);
                rd_val = Some(Capability::from_words(w0, w1, t0 && t1, cfg.addr_w));
                latency = 2;
            } else {
                exception = Some(Exception::AccessFault);
            }
        }
        Kind::CStoreCap => {
            if allowed(cap_size, Perms::W | Perms::STORE_CAP) {
                let (w0, w1) = rs2.to_words(cfg.addr_w);
                data.push(Beat {
                    write: true,
                    addr: ea,
                    wdata: w0,
                    wtag: rs2.tag,
                });
                data.push(Beat {
                    write: true,
                    addr: (ea + 4) & m,
                    wdata: w1,
                    wtag: rs2.tag,
                });
                latency = 2;
            } else {
                exception = Some(Exception::AccessFault);
            }
        }
        Kind::CSetBounds => {
            rd_val = Some(derive_set_bounds(&rs1, rs1.addr, rs1.addr + rs2.addr));
        }
        Kind::CAndPerm => {
            rd_val = Some(derive_and_perm(&rs1, Perms((rs2.addr & 0x3f) as u8)));
        }
        Kind::CIncAddr => {
            let mut c = rs1.with_addr(ea);
            c.tag &= !c.is_sealed();
            rd_val = Some(c);
        }
        Kind::CJalr => {
            if !rs1.tag || (rs1.otype != OTYPE_UNSEALED && rs1.otype != OTYPE_SENTRY) {
                exception = Some(Exception::JumpFault);
            } else {
                rd_val = Some(s.pcc.with_addr(next_pc));
                switch = rs1.otype == OTYPE_SENTRY;
                let mut t = rs1;
                t.otype = OTYPE_UNSEALED;
                n.pcc = t;
                npc = None;
            }
        }
        Kind::Branch => {
            let eq = rs1.addr == rs2.addr;
            if eq == (ins.funct == BEQ) {
                npc = Some((pc + imm) & m);
            }
        }
        Kind::EcallRet => match ins.funct {
            sys::ECALL => exception = Some(Exception::Ecall),
            sys::MRET => {
                n.pcc = s.scr[1];
                n.exc = false;
                npc = None;
            }
            sys::CSPECIALR => rd_val = Some(s.scr[(ins.imm & 1) as usize]),
            _ => n.scr[(ins.imm & 1) as usize] = rs1,
        },
    }
    if exception.is_some() {
        trap(&mut n, pc);
        switch = true;
        latency = 1;
        rd_val = None;
    } else if let Some(p) = npc {
        n.pcc.addr = p;
    }
    if let Some(v) = rd_val {
        n.regs[ins.rd as usize] = v;
    }
    n.cycle = (s.cycle + latency) & 0xffff_ffff;
    Ok(StepOutcome {
        state: n,
        data,
        exception,
        context_switch: switch,
    })
}

/// Result of fetching and executing one instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Retired {
    pub pc: u64,
    /// Fetched word, `None` when the fetch was denied.
    pub word: Option<u64>,
    pub data: Vec<Beat>,
    pub exception: Option<Exception>,
    pub context_switch: bool,
}

/// Architectural machine: state plus memory.
pub struct Iss {
    pub cfg: CoreConfig,
    pub prot: bool,
    pub state: CoreState,
    pub mem: Memory,
}

impl Iss {
    pub fn new(cfg: &CoreConfig) -> Iss {
        Iss {
            cfg: cfg.clone(),
            prot: true,
            state: CoreState::reset(cfg),
            mem: Memory::new(cfg.addr_w),
        }
    }

    /// Fetches at the PCC address, checks it, decodes and executes.
    pub fn step(&mut self) -> Retired {
        let pc = self.state.pc();
        let s = &mut self.state;
        if self.prot && !check_access(&s.pcc, pc, 4, Perms::X, self.cfg.addr_w) {
            trap(s, pc);
            s.cycle = (s.cycle + 1) & 0xffff_ffff;
            return Retired {
                pc,
                word: None,
                data: vec![],
                exception: Some(Exception::FetchFault),
                context_switch: true,
            };
        }
        let word = self.mem.read(pc).0;
        let ins = match Instruction::decode(word as u32, self.cfg.num_regs) {
            Ok(i) => i,
            Err(_) => {
                trap(s, pc);
                s.cycle = (s.cycle + 1) & 0xffff_ffff;
                return Retired {
                    pc,
                    word: Some(word),
                    data: vec![],
                    exception: Some(Exception::Illegal),
                    context_switch: true,
                };
            }
        };
        let mem = &self.mem;
        let out = iss_step(&self.cfg, self.prot, s, &ins, &|a| mem.read(a))
            .expect("decoded instruction is well formed");
        for b in &out.data {
            self.mem.apply(b);
        }
        self.state = out.state;
        Retired {
            pc,
            word: Some(word),
            data: out.data,
            exception: out.exception,
            context_switch: out.context_switch,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(reg1: Capability, reg2: Capability) -> (CoreConfig, CoreState) {
        let cfg = CoreConfig::default();
        let mut s = CoreState::reset(&cfg);
        s.regs[1] = reg1;
        s.regs[2] = reg2;
        (cfg, s)
    }

    #[test]
    fn capstore_inside_bounds_writes_two_beats() {
        let c = Capability::bounded(0x100, 0x200, Perms::ALL).with_addr(0x1f8);
        let (cfg, s) = setup(c, Capability::almighty(16));
        let out = iss_step(&cfg, true, &s, &Instruction::cstore(1, 2, 0), &|_| {
            (0, false)
        })
        .unwrap();
        assert_eq!(out.exception, None);
        assert_eq!(out.data.len(), 2);
        assert!(out.data.iter().all(|b| b.write && b.wtag));
        assert_eq!(out.data[0].addr, 0x1f8);
        assert_eq!(out.state.cycle, 2);
    }

    #[test]
    fn capstore_straddling_top_traps() {
        let c = Capability::bounded(0x100, 0x200, Perms::ALL).with_addr(0x1fc);
        let (cfg, s) = setup(c, Capability::almighty(16));
        let out = iss_step(&cfg, true, &s, &Instruction::cstore(1, 2, 0), &|_| {
            (0, false)
        })
        .unwrap();
        assert_eq!(out.exception, Some(Exception::AccessFault));
        assert!(out.data.is_empty());
        assert!(out.state.exc);
    }

    #[test]
    fn sentry_jump_unseals_and_switches() {
        let mut target = Capability::bounded(0x400, 0x500, Perms::X);
        target.otype = OTYPE_SENTRY;
        let (cfg, s) = setup(target, Capability::default());
        let out = iss_step(&cfg, true, &s, &Instruction::jalr(3, 1), &|_| (0, false)).unwrap();
        assert!(out.context_switch);
        assert_eq!(out.state.pcc.otype, OTYPE_UNSEALED);
        assert_eq!(out.state.pc(), 0x400);
        assert_eq!(out.state.regs[3].addr, 4);
    }

    #[test]
    fn register_out_of_range_is_malformed() {
        let cfg = CoreConfig {
            num_regs: 2,
            ..CoreConfig::default()
        };
        let s = CoreState::reset(&cfg);
        let r = iss_step(&cfg, true, &s, &Instruction::li(5, 1), &|_| (0, false));
        assert!(matches!(r, Err(IssError::Malformed(_))));
    }
}
