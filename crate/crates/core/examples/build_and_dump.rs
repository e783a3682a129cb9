//! Builds a saturating counter, proves its bound over a window and prints
//! the textual form of the system.
//!
//! `cargo run --release --example build_and_dump`

use capcheck::engine::{bitblast, solve_clauses, Limits, SolveOutcome};
use capcheck::ir::{dump_system, load_system, unroll_window, Sort, Term, TsBuilder};

fn main() {
    let mut b = TsBuilder::new("counter");
    let en = b.input("en", Sort::Bool);
    let cnt = b.state("cnt", Sort::bv(4));
    let limit = Term::bv(9, 4);
    let bumped = Term::ite(&en.and(&cnt.ult(&limit)), &cnt.add(&Term::bv(1, 4)), &cnt);
    b.next("cnt", bumped);
    b.init("cnt", Term::bv(0, 4));
    b.define("at_limit", cnt.equals(&limit));
    let ts = b.build().expect("system is well formed");

    let k = 12;
    let u = unroll_window(&ts, k).expect("window unrolls");
    let mut constraints = u.constraints();
    constraints.push(u.var("cnt", 0).unwrap().equals(&Term::bv(0, 4)));
    let over: Vec<Term> = (0..=k)
        .map(|i| u.var("cnt", i).unwrap().ugt(&limit))
        .collect();
    constraints.push(Term::or_all(&over));
    let cnf = bitblast(&constraints).expect("constraints blast");
    let (outcome, stats) = solve_clauses(cnf.num_vars, &cnf.clauses, Limits::default());
    let verdict = match outcome {
        SolveOutcome::Unsat => "never exceeds 9",
        SolveOutcome::Sat(_) => "exceeds 9",
        SolveOutcome::Unknown => "unknown",
    };
    println!(
        "{k} steps: {verdict} ({} vars, {} clauses, {} conflicts)",
        cnf.num_vars,
        cnf.clauses.len(),
        stats.conflicts
    );

    let text = dump_system(&ts);
    assert_eq!(dump_system(&load_system(&text).expect("dump parses")), text);
    print!("{text}");
}
