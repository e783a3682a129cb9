//! Runs a short program on the instruction set simulator and on the
//! pipelined core side by side.
//!
//! `cargo run --release --example simulate_core`

use capcheck::cheri::{
    build_core, Capability, CoreConfig, CoreState, Instruction, Iss, Memory, Perms, PipelineHarness,
};

fn main() {
    let cfg = CoreConfig::default();
    let prog = [
        Instruction::li(2, 7),
        Instruction::store(1, 2, 0),
        Instruction::load(3, 1, 0),
        Instruction::incaddr(1, 1, 0x40),
        Instruction::store(1, 2, 0),
    ];
    let mut mem = Memory::new(cfg.addr_w);
    mem.load_program(0, &prog);

    let mut state = CoreState::reset(&cfg);
    state.regs[1] = Capability::bounded(0x100, 0x140, Perms::ALL).with_addr(0x100);
    state.scr[0] = Capability::almighty(cfg.addr_w).with_addr(0x200);

    let mut iss = Iss::new(&cfg);
    iss.state = state.clone();
    iss.mem = mem.clone();

    let ts = build_core(&cfg).expect("core builds");
    let mut pipe = PipelineHarness::new(&cfg, &ts);
    pipe.load_state(&state);
    pipe.mem = mem;

    for _ in 0..prog.len() {
        let r = iss.step();
        let (pc, beats, trap) = pipe.run_instruction(8).expect("pipeline retires");
        assert_eq!((pc, &beats, trap), (r.pc, &r.data, r.exception.is_some()));
        assert_eq!(pipe.arch_state(), iss.state);
        let word = r
            .word
            .and_then(|w| Instruction::decode(w as u32, cfg.num_regs).ok());
        println!("{pc:#06x} {word:?}");
        for b in &beats {
            match b.write {
                true => println!("       write {:#06x} = {}", b.addr, b.wdata),
                false => println!("       read  {:#06x}", b.addr),
            }
        }
        if let Some(e) = r.exception {
            println!("       trap {e:?}, pcc now {:#06x}", iss.state.pc());
        }
    }
    println!(
        "r3 = {}, cycles = {}",
        iss.state.regs[3].addr, iss.state.cycle
    );
}
