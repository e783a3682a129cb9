//! Full verification flow on the reference core.
//!
//! `cargo run --release --example verify_core -- [toggle ...]`, for
//! example `bug_capstore_second_beat` or `fetch_fault_squash`.

use capcheck::cheri::CoreConfig;
use capcheck::flow::{report_table, run_flow, FlowOptions};
use capcheck::props::{CapLocation, LocationKind, ProtectedSet};

fn main() {
    let mut cfg = CoreConfig::default();
    for t in std::env::args().skip(1) {
        cfg = cfg.with_bug(&t, true);
    }
    let mut ps = ProtectedSet::new();
    ps.insert(CapLocation::new("pcc", LocationKind::Register))
        .unwrap();
    let state = run_flow(&cfg, &ps, &FlowOptions::default()).expect("flow runs");
    print!("{}", report_table(&state));
    println!("wall time: {:.1?}", state.total_wall());
}
