//! Three-stage pipelined core (fetch, execute, writeback) emitted as a
//! transition system.
//!
//! Memory is not part of the state. Each port exposes its request signals
//! as defines and takes its read data as a per-cycle input.

use crate::ir::{IrError, Sort, Term, TransitionSystem, TsBuilder};

use super::capability::{
    check_access_term, derive_and_perm_term, derive_set_bounds_term, CapTerm, Capability, Perms,
    FIELDS, OTYPE_SENTRY, OTYPE_WIDTH,
};
use super::config::{ConfigError, CoreConfig};
use super::isa::{alu, sys, Kind, BEQ};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ir(#[from] IrError),
}

pub fn field_sort(field: &str, addr_w: u32) -> Sort {
    match field {
        "tag" => Sort::Bool,
        "perms" => Sort::bv(Perms::WIDTH),
        "base" | "addr" => Sort::bv(addr_w),
        "top" => Sort::bv(addr_w + 1),
        "otype" => Sort::bv(OTYPE_WIDTH),
        _ => panic!("no capability field `{field}`"),
    }
}

fn cap_state(b: &mut TsBuilder, loc: &str, addr_w: u32) -> CapTerm {
    let f = FIELDS.map(|f| b.state(&format!("{loc}.{f}"), field_sort(f, addr_w)));
    CapTerm::from_fields(f)
}

fn cap_next(b: &mut TsBuilder, loc: &str, c: &CapTerm) {
    for (f, t) in FIELDS.iter().zip(c.fields()) {
        b.next(&format!("{loc}.{f}"), t.clone());
    }
}

fn cap_define(b: &mut TsBuilder, loc: &str, c: &CapTerm) {
    for (f, t) in FIELDS.iter().zip(c.fields()) {
        b.define(&format!("{loc}.{f}"), t.clone());
    }
}

/// Register names in catalogue order.
pub fn register_names(cfg: &CoreConfig) -> Vec<String> {
    let mut v: Vec<String> = (0..cfg.num_regs).map(|i| format!("r{i}")).collect();
    v.push("scr0".into());
    v.push("scr1".into());
    v.push("pcc".into());
    v
}

/// Selects among `items` by a small index term; out-of-range indices
/// select the last item.
fn select(idx: &Term, items: &[CapTerm]) -> CapTerm {
    let w = idx.width();
    let mut acc = items.last().unwrap().clone();
    for i in (0..items.len() - 1).rev() {
        acc = CapTerm::mux(&idx.equals(&Term::bv(i as u64, w)), &items[i], &acc);
    }
    acc
}

/// Builds the pipelined core for a configuration.
pub fn build_core(cfg: &CoreConfig) -> Result<TransitionSystem, BuildError> {
    cfg.validate()?;
    let aw = cfg.addr_w;
    let n = cfg.num_regs as usize;
    let mut b = TsBuilder::new("core");

    // State.
    let regs: Vec<CapTerm> = (0..n)
        .map(|i| cap_state(&mut b, &format!("r{i}"), aw))
        .collect();
    let scr: Vec<CapTerm> = (0..2)
        .map(|i| cap_state(&mut b, &format!("scr{i}"), aw))
        .collect();
    let pcc = cap_state(&mut b, "pcc", aw);
    let cycle = b.state("cycle", Sort::bv(32));
    let exc = b.state("exc", Sort::Bool);
    let fb_valid = b.state("fb.valid", Sort::Bool);
    let fb_fault = b.state("fb.fault", Sort::Bool);
    let fb_instr = b.state("fb.instr", Sort::bv(32));
    let fb_pc = b.state("fb.pc", Sort::bv(aw));
    let ex_beat = b.state("ex.beat", Sort::Bool);
    let ex_delay = b.state("ex.delay", Sort::Bool);
    let ld_w0 = b.state("ld.w0", Sort::bv(32));
    let ld_tag = b.state("ld.tag", Sort::Bool);
    let wb_valid = b.state("wb.valid", Sort::Bool);
    let wb_rd = b.state("wb.rd", Sort::bv(3));
    let wb = cap_state(&mut b, "wb", aw);

    // Inputs.
    let reset = b.input("reset", Sort::Bool);
    let pin = b.input("cheri_en", Sort::Bool);
    let i_rdata = b.input("iport.rdata", Sort::bv(32));
    let d_rdata = b.input("dport.rdata", Sort::bv(32));
    let d_rtag = b.input("dport.rtag", Sort::Bool);

    let bv = |v: u64, w: u32| Term::bv(v, w);
    let t = Term::tru();
    let live = reset.not();

    // Protection enable.
    let documented = if cfg.documented_enable_level() {
        pin.clone()
    } else {
        pin.not()
    };
    let prot = if cfg.bug_enable_pin_polarity {
        documented.not()
    } else {
        documented.clone()
    };
    b.define("prot", prot.clone());
    b.define("env.pin", documented);

    // Decode.
    let op = fb_instr.extract(5, 2);
    let rd = fb_instr.extract(8, 6);
    let rs1_i = fb_instr.extract(11, 9);
    let rs2_i = fb_instr.extract(14, 12);
    let funct = fb_instr.extract(17, 15);
    let imm14 = fb_instr.extract(31, 18);
    let imm = if aw >= 14 {
        imm14.sext(aw)
    } else {
        imm14.extract(aw - 1, 0)
    };
    let nregs = bv(n as u64, 3);
    let regs_ok = if n == 8 {
        t.clone()
    } else {
        rd.ult(&nregs)
            .and(&rs1_i.ult(&nregs))
            .and(&rs2_i.ult(&nregs))
    };
    let mut funct_ok = Term::fals();
    for k in Kind::ALL {
        funct_ok = funct_ok.or(&op.equals(&bv(k.opcode() as u64, 4)).and(
            &funct
                .ult(&bv(k.funct_count() as u64, 3))
                .or(&Term::bool(k.funct_count() == 8)),
        ));
    }
    let legal = fb_instr
        .extract(1, 0)
        .equals(&bv(3, 2))
        .and(&funct_ok)
        .and(&regs_ok);
    let exec = fb_valid.and(&fb_fault.not()).and(&legal);
    let is = |k: Kind| exec.and(&op.equals(&bv(k.opcode() as u64, 4)));
    let fn_is = |f: u8| funct.equals(&bv(f as u64, 3));

    // Operands with forwarding from writeback.
    let read = |idx: &Term| {
        let r = select(idx, &regs);
        CapTerm::mux(&wb_valid.and(&wb_rd.equals(idx)), &wb, &r)
    };
    let rs1 = read(&rs1_i);
    let rs2 = read(&rs2_i);
    let ea = rs1.addr.add(&imm);
    let ea4 = ea.add(&bv(4, aw));
    let allow = |ok: Term| prot.not().or(&ok);
    let cap_size = if cfg.bug_capstore_second_beat { 4 } else { 8 };
    let load_ok = allow(check_access_term(&rs1, &ea, 4, Perms::R));
    let store_ok = allow(check_access_term(&rs1, &ea, 4, Perms::W));
    let clc_ok = allow(check_access_term(
        &rs1,
        &ea,
        cap_size,
        Perms::R | Perms::LOAD_CAP,
    ));
    let csc_ok = allow(check_access_term(
        &rs1,
        &ea,
        cap_size,
        Perms::W | Perms::STORE_CAP,
    ));
    b.define("chk.load", load_ok.clone());

    let k_load = is(Kind::Load);
    let k_store = is(Kind::Store);
    let k_clc = is(Kind::CLoadCap);
    let k_csc = is(Kind::CStoreCap);
    let k_jalr = is(Kind::CJalr);
    let k_sys = is(Kind::EcallRet);
    let load_go = k_load.and(&load_ok);
    let store_go = k_store.and(&store_ok);
    let clc_go = k_clc.and(&clc_ok);
    let csc_go = k_csc.and(&csc_ok);
    let capmem_go = clc_go.or(&csc_go);
    let beat1 = ex_beat.and(&capmem_go);

    let sentry = bv(OTYPE_SENTRY as u64, OTYPE_WIDTH);
    let jump_ok = k_jalr
        .and(&rs1.tag)
        .and(&rs1.unsealed().or(&rs1.otype.equals(&sentry)));
    let access_fault = k_load
        .and(&load_ok.not())
        .or(&k_store.and(&store_ok.not()))
        .or(&k_clc.and(&clc_ok.not()))
        .or(&k_csc.and(&csc_ok.not()));
    let ecall = k_sys.and(&fn_is(sys::ECALL));
    let mret = k_sys.and(&fn_is(sys::MRET));

    // A faulting fetch can hold the execute stage one extra cycle.
    let delay_now = if cfg.bug_fetch_before_pcc_check {
        fb_valid
            .and(&fb_fault)
            .and(&fb_instr.extract(1, 0).equals(&bv(3, 2)))
            .and(&ex_delay.not())
    } else {
        Term::fals()
    };
    let trap = fb_valid.and(
        &fb_fault
            .and(&delay_now.not())
            .or(&fb_fault.not().and(&legal.not()))
            .or(&access_fault)
            .or(&k_jalr.and(&jump_ok.not()))
            .or(&ecall),
    );
    let stall = fb_valid.and(&capmem_go.and(&beat1.not()).or(&delay_now));
    let done = fb_valid.and(&stall.not());
    b.define("ex.done", done.clone());
    b.define("ex.trap", trap.clone());

    // Data port.
    let cap_beat = fb_valid.and(&capmem_go);
    let d_valid = live.and(&load_go.or(&store_go).or(&cap_beat));
    let d_we = live.and(&store_go.or(&csc_go));
    let (w0, w1) = rs2.to_words();
    let d_addr = Term::ite(&beat1, &ea4, &ea);
    let d_wdata = Term::ite(
        &csc_go,
        &Term::ite(&beat1, &w1, &w0),
        &Term::ite(&store_go, &rs2.addr.zext(32), &bv(0, 32)),
    );
    b.define("dport.valid", d_valid);
    b.define("dport.we", d_we.clone());
    b.define("dport.addr", d_addr);
    b.define("dport.wdata", d_wdata);
    b.define("dport.wtag", d_we.and(&csc_go).and(&rs2.tag));
    b.define("dport.size", bv(4, 4));

    let loaded = CapTerm::from_words(&ld_w0, &d_rdata, &ld_tag.and(&d_rtag), aw);
    let ld_port_valid = live.and(&clc_go).and(&beat1);
    b.define("dport_ld.valid", ld_port_valid);
    cap_define(&mut b, "dport_ld", &loaded);
    b.define("dport_st.valid", d_we.and(&csc_go));
    cap_define(&mut b, "dport_st", &rs2);

    // Results.
    let ra = &rs1.addr;
    let rb = &rs2.addr;
    let alu_v = [
        (alu::ADD, ra.add(rb)),
        (alu::SUB, ra.sub(rb)),
        (alu::AND, ra.and(rb)),
        (alu::OR, ra.or(rb)),
        (alu::XOR, ra.xor(rb)),
        (alu::SLTU, ra.ult(rb).to_bv1().zext(aw)),
        (alu::ADDI, ea.clone()),
    ]
    .iter()
    .rev()
    .fold(imm.clone(), |acc, (f, v)| Term::ite(&fn_is(*f), v, &acc));
    let new_top = ra.zext(aw + 1).add(&rb.zext(aw + 1));
    let setb = derive_set_bounds_term(&rs1, ra, &new_top);
    let andp = derive_and_perm_term(&rs1, &rb.extract(Perms::WIDTH - 1, 0));
    let inca = rs1.with_addr(&ea).with_tag(&rs1.tag.and(&rs1.unsealed()));
    let fb_pc4 = fb_pc.add(&bv(4, aw));
    let link = pcc.with_addr(&fb_pc4);
    let scr_sel = imm.extract(0, 0).equals(&bv(1, 1));
    let scr_r = CapTerm::mux(&scr_sel, &scr[1], &scr[0]);
    let choices: Vec<(Term, CapTerm)> = vec![
        (is(Kind::Alu), CapTerm::int(&alu_v)),
        (k_load.clone(), CapTerm::int(&d_rdata.extract(aw - 1, 0))),
        (k_clc.clone(), loaded.clone()),
        (is(Kind::CSetBounds), setb),
        (is(Kind::CAndPerm), andp),
        (is(Kind::CIncAddr), inca),
        (k_jalr.clone(), link),
    ];
    let result = choices
        .iter()
        .rev()
        .fold(scr_r, |acc, (c, v)| CapTerm::mux(c, v, &acc));
    let writes_rd =
        Term::or_all(choices.iter().map(|(c, _)| c)).or(&k_sys.and(&fn_is(sys::CSPECIALR)));
    let wb_write = done.and(&trap.not()).and(&writes_rd).and(&live);

    // Control transfer.
    let eq = ra.equals(rb);
    let taken = is(Kind::Branch).and(&eq.equals(&fn_is(BEQ)));
    let redirect = done.and(&trap.or(&taken).or(&jump_ok).or(&mret));
    let mut vector = scr[0].clone();
    vector.otype = bv(0, OTYPE_WIDTH);
    let mut jump_target = rs1.clone();
    jump_target.otype = bv(0, OTYPE_WIDTH);
    let target = CapTerm::mux(
        &trap,
        &vector,
        &CapTerm::mux(
            &jump_ok,
            &jump_target,
            &CapTerm::mux(&mret, &scr[1], &pcc.with_addr(&fb_pc.add(&imm))),
        ),
    );
    b.define(
        "switch",
        reset
            .or(&done.and(&trap))
            .or(&done.and(&jump_ok).and(&rs1.otype.equals(&sentry))),
    );

    // Fetch.
    let fetch_slot = redirect.not().and(&fb_valid.not().or(&done));
    let fetch_ok = allow(check_access_term(&pcc, &pcc.addr, 4, Perms::X));
    b.define("chk.fetch", fetch_ok.clone());
    let early = cfg.bug_fetch_before_pcc_check;
    let i_valid = live
        .and(&fetch_slot)
        .and(&if early { t.clone() } else { fetch_ok.clone() });
    b.define("iport.valid", i_valid);
    b.define("iport.we", Term::fals());
    b.define("iport.addr", pcc.addr.clone());
    b.define("iport.wdata", bv(0, 32));
    b.define("iport.wtag", Term::fals());
    b.define("iport.size", bv(4, 4));
    let faulting_word = if early && !cfg.fetch_fault_squash {
        i_rdata.clone()
    } else {
        bv(0, 32)
    };
    let fetched = Term::ite(&fetch_ok, &i_rdata, &faulting_word);

    let hold_or = |fetch: &Term, cur: &Term, rst: Term| {
        Term::ite(&reset, &rst, &Term::ite(&fetch_slot, fetch, cur))
    };
    b.next(
        "fb.valid",
        Term::ite(
            &reset,
            &Term::fals(),
            &Term::ite(&redirect, &Term::fals(), &fetch_slot.or(&fb_valid)),
        ),
    );
    b.next(
        "fb.fault",
        hold_or(&fetch_ok.not(), &fb_fault, Term::fals()),
    );
    b.next("fb.instr", hold_or(&fetched, &fb_instr, bv(0, 32)));
    b.next("fb.pc", hold_or(&pcc.addr, &fb_pc, bv(0, aw)));
    b.next("ex.beat", live.and(&cap_beat).and(&beat1.not()));
    b.next("ex.delay", live.and(&delay_now));
    let latch = live.and(&cap_beat).and(&beat1.not()).and(&clc_go);
    b.next("ld.w0", Term::ite(&latch, &d_rdata, &ld_w0));
    b.next("ld.tag", Term::ite(&latch, &d_rtag, &ld_tag));

    // Writeback.
    b.next("wb.valid", wb_write.clone());
    b.next("wb.rd", Term::ite(&wb_write, &rd, &wb_rd));
    cap_next(&mut b, "wb", &CapTerm::mux(&wb_write, &result, &wb));
    let zero = CapTerm::constant(&Capability::default(), aw);
    for (i, r) in regs.iter().enumerate() {
        let hit = wb_valid.and(&wb_rd.equals(&bv(i as u64, 3)));
        let nv = CapTerm::mux(&reset, &zero, &CapTerm::mux(&hit, &wb, r));
        cap_next(&mut b, &format!("r{i}"), &nv);
    }

    // Architectural control state.
    let pc_inc = pcc.with_addr(&pcc.addr.add(&bv(4, aw)));
    let pcc_next = CapTerm::mux(
        &reset,
        &CapTerm::constant(&Capability::almighty(aw), aw),
        &CapTerm::mux(
            &redirect,
            &target,
            &CapTerm::mux(&fetch_slot.and(&fetch_ok), &pc_inc, &pcc),
        ),
    );
    cap_next(&mut b, "pcc", &pcc_next);
    let specialw = done
        .and(&trap.not())
        .and(&k_sys)
        .and(&fn_is(sys::CSPECIALW));
    for (i, s) in scr.iter().enumerate() {
        let sel = if i == 0 {
            scr_sel.not()
        } else {
            scr_sel.clone()
        };
        let mut nv = CapTerm::mux(&specialw.and(&sel), &rs1, s);
        if i == 1 {
            nv = CapTerm::mux(&trap, &pcc.with_addr(&fb_pc), &nv);
        }
        cap_next(
            &mut b,
            &format!("scr{i}"),
            &CapTerm::mux(&reset, &zero, &nv),
        );
    }
    b.next(
        "exc",
        live.and(&Term::ite(
            &trap,
            &t,
            &Term::ite(&done.and(&mret), &Term::fals(), &exc),
        )),
    );
    b.next(
        "cycle",
        Term::ite(&reset, &bv(0, 32), &cycle.add(&fb_valid.to_bv1().zext(32))),
    );

    // Labels.
    let mut arch = Vec::new();
    for loc in register_names(cfg) {
        for f in FIELDS {
            arch.push(format!("{loc}.{f}"));
        }
    }
    arch.push("cycle".into());
    arch.push("exc".into());
    let mut uarch: Vec<String> = [
        "fb.valid", "fb.fault", "fb.instr", "fb.pc", "ex.beat", "ex.delay", "ld.w0", "ld.tag",
        "wb.valid", "wb.rd",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for f in FIELDS {
        uarch.push(format!("wb.{f}"));
    }
    for s in &arch {
        b.label("P", s);
        b.label("P_arch", s);
    }
    for s in &uarch {
        b.label("P", s);
        b.label("P_uarch", s);
    }
    b.label("mem_port", "dport.valid");
    b.label("mem_port", "iport.valid");
    b.label("timing", "cycle");
    b.label("env", "env.pin");
    b.label("switch", "switch");
    b.label("reset", "reset");
    for loc in register_names(cfg) {
        b.label("cap_register", &format!("{loc}.tag"));
    }
    b.label("cap_buffer", "wb.tag");
    b.label("cap_load_port", "dport_ld.tag");
    b.label("cap_store_port", "dport_st.tag");
    Ok(b.build()?)
}
