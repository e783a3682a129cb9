//! Capability store that straddles the top of its bounds. The reference
//! simulator traps; the core with the second-beat defect writes one word
//! past the top.
//!
//! `cargo run --release --example capstore_bug`

use capcheck::cheri::{
    build_core, Capability, CoreConfig, CoreState, Instruction, Iss, Memory, Perms, PipelineHarness,
};
use capcheck::flow::Design;

fn run(cfg: &CoreConfig, state: &CoreState, mem: &Memory) {
    let ts = build_core(cfg).expect("core builds");
    let mut pipe = PipelineHarness::new(cfg, &ts);
    pipe.load_state(state);
    pipe.mem = mem.clone();
    let (_, beats, trap) = pipe.run_instruction(8).expect("pipeline retires");
    println!("{}: trap = {trap}", cfg.label());
    for b in beats.iter().filter(|b| b.write) {
        let outside = b.addr >= state.regs[1].top;
        println!(
            "  write {:#06x} tag {}{}",
            b.addr,
            b.wtag,
            if outside { "  <- outside bounds" } else { "" }
        );
    }
}

fn main() {
    let clean = CoreConfig::default();
    let mut mem = Memory::new(clean.addr_w);
    mem.load_program(0, &[Instruction::cstore(1, 2, 0)]);
    let mut state = CoreState::reset(&clean);
    state.regs[1] = Capability::bounded(0x100, 0x200, Perms::ALL).with_addr(0x1fc);
    state.regs[2] = Capability::almighty(clean.addr_w);

    let mut iss = Iss::new(&clean);
    iss.state = state.clone();
    iss.mem = mem.clone();
    println!("reference: {:?}", iss.step().exception);

    run(&clean, &state, &mem);
    run(
        &clean.with_bug("bug_capstore_second_beat", true),
        &state,
        &mem,
    );
}
