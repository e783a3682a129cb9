//! Explicit-state search over the micro core against the symbolic
//! verdicts. Capability bounds are given as `base..top` pairs.
//!
//! `cargo run --release --example explicit_oracle -- 0..4 1..3`

use std::collections::BTreeSet;

use capcheck::cheri::{build_micro_core, MicroCap, MicroConfig};
use capcheck::engine::{
    explicit_state_check, ExplicitKind, ExplicitLimits, ExplicitResult, SolverOptions,
};
use capcheck::flow::{reduction_verdicts, MicroDesign};
use capcheck::props::{attach_symbolic_address, ProtectedSet};

fn parse_cap(s: &str) -> MicroCap {
    let (b, t) = s.split_once("..").expect("base..top");
    MicroCap {
        tag: true,
        base: b.parse().expect("base"),
        top: t.parse().expect("top"),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let caps = match args.as_slice() {
        [a, b] => [parse_cap(a), parse_cap(b)],
        _ => [parse_cap("0..4"), parse_cap("1..3")],
    };
    let protected: BTreeSet<u64> = (4..8).collect();
    let core = MicroConfig {
        explicit_memory: false,
        caps,
        ..MicroConfig::default()
    };
    let with_memory = build_micro_core(&MicroConfig {
        explicit_memory: true,
        ..core.clone()
    })
    .expect("micro core builds");
    for kind in [ExplicitKind::Eq1Confidentiality, ExplicitKind::Eq2Integrity] {
        match explicit_state_check(
            &with_memory,
            kind,
            &protected,
            12,
            &ExplicitLimits::default(),
        )
        .expect("search runs")
        {
            ExplicitResult::Holds { product_states } => {
                println!("{kind:?}: holds over {product_states} states")
            }
            ExplicitResult::Fails(t) => println!("{kind:?}: fails after {} steps", t.inputs.len()),
        }
    }
    let (ts, _) = attach_symbolic_address(&build_micro_core(&core).expect("micro core builds"))
        .expect("address attaches");
    let d = MicroDesign { core, protected };
    let v = reduction_verdicts(&d, &ProtectedSet::full(&ts), 4, &SolverOptions::default())
        .expect("checks run");
    println!(
        "symbolic: confidentiality {}, integrity {}",
        v.confidentiality_secure(),
        v.integrity_secure()
    );
}
