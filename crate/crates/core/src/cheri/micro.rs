//! Tiny capability machine for exhaustive cross-checking.
//!
//! Two capability registers with 3-bit word addresses, one data bit and
//! optionally an explicit 8-word memory of one-bit words. Each cycle takes
//! a 7-bit instruction `op[6:4] | reg[3] | a[2:0]` as input.

use serde::{Deserialize, Serialize};

use crate::ir::{IrError, Sort, Term, TransitionSystem, TsBuilder};

pub const MICRO_ADDR_W: u32 = 3;
pub const MICRO_WORDS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MicroOp {
    Nop = 0,
    /// `d := mem[a]`, checked against the selected capability.
    Load = 1,
    /// `mem[a] := d`, checked against the selected capability.
    Store = 2,
    /// Copies the selected capability into the other register.
    Move = 3,
    /// Clears the tag of the selected capability.
    Clear = 4,
    /// Lowers the top of the selected capability to `a`.
    SetTop = 5,
    /// `d := a[0]`.
    Li = 6,
}

impl MicroOp {
    pub fn encode(self, reg: u8, a: u8) -> u64 {
        ((self as u64) << 4) | (((reg & 1) as u64) << 3) | (a & 7) as u64
    }
}

/// Capability of the micro core: words `base <= a < top`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MicroCap {
    pub tag: bool,
    pub base: u8,
    pub top: u8,
}

impl MicroCap {
    pub fn covers(&self, a: u8) -> bool {
        self.tag && self.base <= a && a < self.top
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicroConfig {
    /// Include the memory words as state instead of a read-data input.
    pub explicit_memory: bool,
    /// Access check also admits `a == top`.
    pub bug_off_by_one: bool,
    /// Setting the top does not check that it shrinks.
    pub bug_settop_grows: bool,
    pub caps: [MicroCap; 2],
}

impl Default for MicroConfig {
    fn default() -> Self {
        MicroConfig {
            explicit_memory: true,
            bug_off_by_one: false,
            bug_settop_grows: false,
            caps: [MicroCap::default(); 2],
        }
    }
}

pub fn build_micro_core(cfg: &MicroConfig) -> Result<TransitionSystem, IrError> {
    let aw = MICRO_ADDR_W;
    let mut b = TsBuilder::new("micro");
    let mut caps = Vec::new();
    for i in 0..2 {
        caps.push([
            b.state(&format!("c{i}.tag"), Sort::Bool),
            b.state(&format!("c{i}.base"), Sort::bv(aw)),
            b.state(&format!("c{i}.top"), Sort::bv(aw + 1)),
        ]);
    }
    let d = b.state("d", Sort::bv(1));
    let mem: Vec<Term> = if cfg.explicit_memory {
        (0..MICRO_WORDS)
            .map(|j| b.state(&format!("mem{j}"), Sort::bv(1)))
            .collect()
    } else {
        Vec::new()
    };
    let instr = b.input("instr", Sort::bv(7));
    let rdata_in = (!cfg.explicit_memory).then(|| b.input("dport.rdata", Sort::bv(1)));

    let op = instr.extract(6, 4);
    let rc = instr.extract(3, 3).equals(&Term::bv(1, 1));
    let a = instr.extract(2, 0);
    let a1 = a.zext(aw + 1);
    let is = |o: MicroOp| op.equals(&Term::bv(o as u64, 3));
    let sel: Vec<Term> = (0..3)
        .map(|f| Term::ite(&rc, &caps[1][f], &caps[0][f]))
        .collect();
    let upper = if cfg.bug_off_by_one {
        a1.ule(&sel[2])
    } else {
        a1.ult(&sel[2])
    };
    let ok = sel[0].and(&sel[1].ule(&a)).and(&upper);
    let load = is(MicroOp::Load).and(&ok);
    let store = is(MicroOp::Store).and(&ok);

    let rdata = match &rdata_in {
        Some(r) => r.clone(),
        None => {
            let mut v = mem[MICRO_WORDS - 1].clone();
            for j in (0..MICRO_WORDS - 1).rev() {
                v = Term::ite(&a.equals(&Term::bv(j as u64, aw)), &mem[j], &v);
            }
            v
        }
    };
    b.define("dport.valid", load.or(&store));
    b.define("dport.we", store.clone());
    b.define("dport.addr", a.clone());
    b.define("dport.wdata", d.clone());
    b.define("dport.wtag", Term::fals());
    b.define("dport.size", Term::bv(1, aw));
    b.define("switch", Term::fals());

    b.next(
        "d",
        Term::ite(
            &load,
            &rdata,
            &Term::ite(&is(MicroOp::Li), &a.extract(0, 0), &d),
        ),
    );
    for (j, m) in mem.iter().enumerate() {
        let hit = store.and(&a.equals(&Term::bv(j as u64, aw)));
        b.next(&format!("mem{j}"), Term::ite(&hit, &d, m));
    }

    let set_top_ok = sel[1].ule(&a).and(&a1.ule(&sel[2]));
    for i in 0..2 {
        let me = if i == 1 { rc.clone() } else { rc.not() };
        let other = if i == 1 { rc.not() } else { rc.clone() };
        let c = &caps[i];
        let moved_in = is(MicroOp::Move).and(&other);
        let settop = is(MicroOp::SetTop).and(&me);
        let clear = is(MicroOp::Clear).and(&me);
        let src = |f: usize| Term::ite(&rc, &caps[1][f], &caps[0][f]);
        let tag_after_set = if cfg.bug_settop_grows {
            c[0].and(&sel[1].ule(&a))
        } else {
            c[0].and(&set_top_ok)
        };
        let tag = Term::ite(
            &moved_in,
            &src(0),
            &Term::ite(
                &clear,
                &Term::fals(),
                &Term::ite(&settop, &tag_after_set, &c[0]),
            ),
        );
        let base = Term::ite(&moved_in, &src(1), &c[1]);
        let top = Term::ite(&moved_in, &src(2), &Term::ite(&settop, &a1, &c[2]));
        b.next(&format!("c{i}.tag"), tag);
        b.next(&format!("c{i}.base"), base);
        b.next(&format!("c{i}.top"), top);
        b.init(&format!("c{i}.tag"), Term::bool(cfg.caps[i].tag));
        b.init(&format!("c{i}.base"), Term::bv(cfg.caps[i].base as u64, aw));
        b.init(
            &format!("c{i}.top"),
            Term::bv(cfg.caps[i].top as u64, aw + 1),
        );
        for f in ["tag", "base", "top"] {
            let n = format!("c{i}.{f}");
            b.label("P", &n);
            b.label("P_arch", &n);
        }
        b.label("cap_register", &format!("c{i}.tag"));
    }
    b.init("d", Term::bv(0, 1));
    b.label("P", "d");
    b.label("P_arch", "d");
    b.label("data", "d");
    for j in 0..mem.len() {
        let n = format!("mem{j}");
        b.init(&n, Term::bv(0, 1));
        b.label("mem", &n);
    }
    b.label("mem_port", "dport.valid");
    b.label("switch", "switch");
    b.build()
}
