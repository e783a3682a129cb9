//! Bit-blasts `x * 3 == 21` over 8 bits by repeated addition, prints the
//! DIMACS text and solves it.
//!
//! `cargo run --release --example dimacs_solver`

use capcheck::engine::{bitblast, solve_clauses, CnfFormula, Limits, SolveOutcome};
use capcheck::ir::{Sort, Term, VarRole};

fn main() {
    let x = Term::var("x", Sort::bv(8), VarRole::Input);
    let triple = x.add(&x).add(&x);
    let cnf = bitblast(&[triple.equals(&Term::bv(21, 8))]).expect("constraint blasts");
    let text = cnf.to_dimacs();
    println!("{}", text.lines().next().unwrap_or_default());
    let parsed = CnfFormula::parse_dimacs(&text).expect("round trip");
    let (outcome, _) = solve_clauses(parsed.num_vars, &parsed.clauses, Limits::default());
    let SolveOutcome::Sat(model) = outcome else {
        println!("unsat");
        return;
    };
    let value = cnf.symbols["x"]
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &v)| acc | ((model[v as usize] as u64) << i));
    println!("x = {value}");
}
