//! Integrity check of the core with every capability location protected.
//! Writes the counterexample, if any, as JSON to stdout.
//!
//! `cargo run --release --example check_integrity -- bug_enable_pin_polarity`

use capcheck::cheri::{build_core, CoreConfig};
use capcheck::engine::{check_interval_property, trace_json, SolverOptions};
use capcheck::flow::Design;
use capcheck::props::{attach_symbolic_address, prop_integrity, ProtectedSet};

fn main() {
    let mut cfg = CoreConfig::default();
    for t in std::env::args().skip(1) {
        cfg = cfg.with_bug(&t, true);
    }
    let (ts, sa) =
        attach_symbolic_address(&build_core(&cfg).expect("core builds")).expect("address attaches");
    let ps = ProtectedSet::full(&ts);
    let spec = prop_integrity(&ts, &ps, &sa).expect("property builds");
    let r = check_interval_property(&ts, &spec, &SolverOptions::default()).expect("check runs");
    eprintln!(
        "{}: {} ({} conflicts)",
        cfg.label(),
        r.verdict(),
        r.stats.conflicts
    );
    if let Some(cex) = r.counterexample() {
        eprintln!("violated: {:?}", cex.violated);
        println!(
            "{}",
            serde_json::to_string_pretty(&trace_json(cex)).unwrap()
        );
    }
}
