//! Two-instance leakage check on the core that fetches before checking
//! the PCC. Prints where the two instances first diverge.
//!
//! `cargo run --release --example leakage_miter`

use capcheck::cheri::{build_core, CoreConfig};
use capcheck::engine::{check_interval_property, SolverOptions};
use capcheck::props::{attach_symbolic_address, prop_upec_miter, ProtectedSet, UpecOptions};

fn main() {
    let cfg = CoreConfig::default().with_bug("bug_fetch_before_pcc_check", true);
    let (ts, sa) =
        attach_symbolic_address(&build_core(&cfg).expect("core builds")).expect("address attaches");
    let ps = ProtectedSet::full(&ts);
    let (m, spec) = prop_upec_miter(&ts, &ps, &sa, &UpecOptions::default()).expect("miter builds");
    let r =
        check_interval_property(&m.product, &spec, &SolverOptions::default()).expect("check runs");
    println!("{}: {}", spec.name, r.verdict());
    if let Some(cex) = r.counterexample() {
        println!("alert: {:?}", cex.alert);
        for d in &cex.diverged {
            println!("  {d}");
        }
    }
}
