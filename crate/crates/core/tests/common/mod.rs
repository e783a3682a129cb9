#![allow(dead_code)]

use capcheck::cheri::{
    build_core, Capability, CoreConfig, CoreState, Instruction, Iss, Kind, Memory, Perms,
    PipelineHarness, IMM_MAX, IMM_MIN,
};
use capcheck::ir::{Op, Sort, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_cap<R: Rng>(rng: &mut R, addr_w: u32) -> Capability {
    let amax = 1u64 << addr_w;
    match rng.gen_range(0..6) {
        0 => Capability::int(rng.gen_range(0..amax)),
        1 | 2 => Capability::almighty(addr_w).with_addr(rng.gen_range(0..amax)),
        _ => {
            let base = rng.gen_range(0..amax);
            let top = rng.gen_range(base..=amax);
            Capability {
                tag: rng.gen_bool(0.8),
                perms: Perms(rng.gen_range(0..64)),
                base,
                top,
                addr: rng.gen_range(0..amax),
                otype: if rng.gen_bool(0.8) {
                    0
                } else {
                    rng.gen_range(0..8)
                },
            }
        }
    }
}

pub fn random_instruction<R: Rng>(rng: &mut R, num_regs: u8) -> Instruction {
    let mut kind = Kind::ALL[rng.gen_range(0..Kind::ALL.len())];
    if kind == Kind::EcallRet && rng.gen_bool(0.7) {
        kind = Kind::Alu;
    }
    let imm = if rng.gen_bool(0.85) {
        rng.gen_range(-16..16)
    } else {
        rng.gen_range(IMM_MIN..=IMM_MAX)
    };
    Instruction {
        kind,
        funct: rng.gen_range(0..kind.funct_count()),
        rd: rng.gen_range(0..num_regs),
        rs1: rng.gen_range(0..num_regs),
        rs2: rng.gen_range(0..num_regs),
        imm,
    }
}

/// Random word: mostly legal instructions, sometimes arbitrary bits.
pub fn random_word<R: Rng>(rng: &mut R, num_regs: u8) -> u64 {
    if rng.gen_bool(0.97) {
        random_instruction(rng, num_regs).encode() as u64
    } else {
        rng.gen::<u32>() as u64
    }
}

pub fn random_state<R: Rng>(rng: &mut R, cfg: &CoreConfig) -> CoreState {
    let mut s = CoreState::reset(cfg);
    for r in s.regs.iter_mut() {
        *r = random_cap(rng, cfg.addr_w);
    }
    let amax = 1u64 << cfg.addr_w;
    s.pcc = Capability::almighty(cfg.addr_w).with_addr(rng.gen_range(0..amax));
    if rng.gen_bool(0.3) {
        s.pcc = random_cap(rng, cfg.addr_w);
    }
    s.scr[0] = Capability::almighty(cfg.addr_w).with_addr(rng.gen_range(0..amax));
    s.scr[1] = random_cap(rng, cfg.addr_w);
    s.cycle = rng.gen::<u32>() as u64;
    s.exc = rng.gen();
    s
}

/// Memory seeded with random words around the given addresses.
pub fn random_memory<R: Rng>(rng: &mut R, cfg: &CoreConfig, around: &[u64], span: u64) -> Memory {
    let mut m = Memory::new(cfg.addr_w);
    let mask = cfg.addr_mask();
    for &c in around {
        for k in 0..span {
            let a = (c + k) & mask;
            m.write(a, random_word(rng, cfg.num_regs), rng.gen_bool(0.1));
        }
    }
    m
}

/// Random bit-vector term of `width` over `vars`.
pub fn random_term<R: Rng>(rng: &mut R, vars: &[Term], depth: u32, width: u32) -> Term {
    if depth == 0 || rng.gen_ratio(1, 5) {
        let v = &vars[rng.gen_range(0..vars.len())];
        return if rng.gen_ratio(1, 4) {
            Term::bv(rng.gen::<u64>() & Sort::bv(width).mask(), width)
        } else {
            v.resize(width)
        };
    }
    let a = random_term(rng, vars, depth - 1, width);
    let b = random_term(rng, vars, depth - 1, width);
    match rng.gen_range(0..12) {
        0 => a.not(),
        1 => a.and(&b),
        2 => a.or(&b),
        3 => a.xor(&b),
        4 => a.add(&b),
        5 => a.sub(&b),
        6 => {
            let c = random_bool(rng, vars, depth - 1);
            Term::ite(&c, &a, &b)
        }
        7 => {
            let hi = rng.gen_range(0..width);
            let lo = rng.gen_range(0..=hi);
            a.extract(hi, lo).zext(width)
        }
        8 => {
            let h = rng.gen_range(1..width);
            a.extract(h - 1, 0).sext(width)
        }
        9 => {
            let h = width / 2;
            a.extract(h - 1, 0).concat(&b.extract(width - h - 1, 0))
        }
        10 => random_bool(rng, vars, depth - 1).to_bv1().zext(width),
        _ => Term::apply(Op::Sub, vec![b, a]).unwrap(),
    }
}

/// Random comparison of two 8-bit terms.
pub fn random_bool<R: Rng>(rng: &mut R, vars: &[Term], depth: u32) -> Term {
    let a = random_term(rng, vars, depth.saturating_sub(1), 8);
    let b = random_term(rng, vars, depth.saturating_sub(1), 8);
    match rng.gen_range(0..4) {
        0 => a.equals(&b),
        1 => a.ult(&b),
        2 => a.ule(&b),
        _ => a.not_equals(&b),
    }
}

/// Property checks run against every solver backend.
pub fn regression_suite() -> Vec<(
    String,
    capcheck::ir::TransitionSystem,
    capcheck::engine::PropertySpec,
)> {
    use capcheck::cheri::{build_core, build_micro_core, MicroCap, MicroConfig};
    use capcheck::props::{
        attach_symbolic_address, prop_confidentiality, prop_integrity, prop_monotonicity,
        ProtectedSet,
    };
    let mut out = Vec::new();
    let micro = MicroConfig {
        explicit_memory: false,
        caps: [
            MicroCap {
                tag: true,
                base: 0,
                top: 4,
            },
            MicroCap::default(),
        ],
        ..MicroConfig::default()
    };
    let mut systems = vec![("micro".to_string(), build_micro_core(&micro).unwrap())];
    for bug in [
        "",
        "bug_capstore_second_beat",
        "bug_enable_pin_polarity",
        "bug_fetch_before_pcc_check",
    ] {
        let cfg = if bug.is_empty() {
            CoreConfig::default()
        } else {
            CoreConfig::default().with_bug(bug, true)
        };
        let label = if bug.is_empty() {
            "core".to_string()
        } else {
            format!("core+{bug}")
        };
        systems.push((label, build_core(&cfg).unwrap()));
    }
    for (label, ts) in systems {
        let (ts, sa) = attach_symbolic_address(&ts).unwrap();
        for (which, ps) in [
            ("full", ProtectedSet::full(&ts)),
            ("empty", ProtectedSet::new()),
        ] {
            let mut specs = vec![prop_integrity(&ts, &ps, &sa).unwrap()];
            specs.extend(prop_confidentiality(&ts, &ps, &sa).unwrap());
            if label == "micro" || which == "empty" {
                specs.push(prop_monotonicity(&ts, &ps, &sa).unwrap());
            }
            for spec in specs {
                out.push((format!("{label}/{which}/{}", spec.name), ts.clone(), spec));
            }
        }
    }
    out
}

/// Runs ISS and pipeline side by side from random states and returns the
/// number of instructions compared.
pub fn lockstep(cfg: &CoreConfig, episodes: usize, steps: usize, seed: u64) -> usize {
    let ts = build_core(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    for ep in 0..episodes {
        let state = random_state(&mut rng, cfg);
        let mut around: Vec<u64> = state.regs.iter().map(|r| r.addr).collect();
        around.push(state.pcc.addr);
        around.push(state.scr[0].addr);
        let mem = random_memory(&mut rng, cfg, &around, 64);
        let mut iss = Iss::new(cfg);
        iss.state = state.clone();
        iss.mem = mem.clone();
        let mut pipe = PipelineHarness::new(cfg, &ts);
        pipe.load_state(&state);
        pipe.mem = mem;
        let mut fetches = Vec::new();
        for step in 0..steps {
            let r = iss.step();
            if r.word.is_some() {
                fetches.push(r.pc);
            }
            let (pc, beats, trap) = pipe
                .run_instruction(8)
                .unwrap_or_else(|| panic!("episode {ep} step {step}: pipeline hung"));
            assert_eq!(pc, r.pc, "episode {ep} step {step}: pc");
            assert_eq!(beats, r.data, "episode {ep} step {step}: data beats");
            assert_eq!(
                trap,
                r.exception.is_some(),
                "episode {ep} step {step}: trap"
            );
            assert_eq!(
                pipe.arch_state(),
                iss.state,
                "episode {ep} step {step}: state after {:?}",
                r
            );
            compared += 1;
            // The pipeline has already fetched the next word.
            let next = iss.state.pc();
            if r.data.iter().any(|b| b.write && b.addr == next) || rng.gen_bool(0.01) {
                break;
            }
        }
    }
    compared
}
