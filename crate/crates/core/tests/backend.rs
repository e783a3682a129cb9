mod common;

use capcheck::engine::{
    check_interval_property, solve, solve_clauses, CnfFormula, Limits, SolveOutcome, SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subprocess() -> SolverOptions {
    SolverOptions::external(env!("CARGO_BIN_EXE_capcheck"), vec!["dimacs-solve".into()])
}

fn kind(o: &SolveOutcome) -> &'static str {
    match o {
        SolveOutcome::Sat(_) => "sat",
        SolveOutcome::Unsat => "unsat",
        SolveOutcome::Unknown => "unknown",
    }
}

#[test]
fn random_formulas_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let n = rng.gen_range(5..40);
        let m = (n as f64 * rng.gen_range(3.0..5.5)) as usize;
        let clauses: Vec<Vec<i32>> = (0..m)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        let v = rng.gen_range(1..=n as i32);
                        if rng.gen() {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        let f = CnfFormula {
            num_vars: n,
            clauses: clauses.clone(),
            ..CnfFormula::default()
        };
        let (a, _) = solve(&f, &SolverOptions::default()).unwrap();
        let (b, _) = solve(&f, &subprocess()).unwrap();
        assert_eq!(kind(&a), kind(&b));
        assert_eq!(
            kind(&a),
            kind(&solve_clauses(n, &clauses, Limits::default()).0)
        );
    }
}

#[test]
fn property_suite_agrees() {
    for (name, ts, spec) in common::regression_suite() {
        let a = check_interval_property(&ts, &spec, &SolverOptions::default()).unwrap();
        let b = check_interval_property(&ts, &spec, &subprocess()).unwrap();
        assert_eq!(a.verdict(), b.verdict(), "{name}");
        assert_ne!(a.verdict(), "unknown", "{name}");
    }
}

#[test]
fn missing_solver_binary_is_an_error() {
    let f = CnfFormula {
        num_vars: 1,
        clauses: vec![vec![1]],
        ..CnfFormula::default()
    };
    assert!(solve(&f, &SolverOptions::external("/nonexistent/solver", vec![])).is_err());
}
