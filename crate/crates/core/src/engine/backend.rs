//! SAT backends: the embedded solver and any external program that reads
//! DIMACS CNF and answers in the usual competition output format.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::cnf::CnfFormula;
use super::sat::{Limits, SolveOutcome, Solver};
use super::EngineError;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Embedded,
    /// Runs `program args... <file.cnf>`.
    External {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub backend: Backend,
    pub timeout_secs: f64,
    pub max_conflicts: Option<u64>,
    pub clause_cap: usize,
    /// Decide each commitment with its own query.
    pub split_commitments: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::Embedded,
            timeout_secs: 300.0,
            max_conflicts: None,
            clause_cap: 50_000_000,
            split_commitments: true,
        }
    }
}

impl SolverOptions {
    pub fn external(program: impl Into<PathBuf>, args: Vec<String>) -> SolverOptions {
        SolverOptions {
            backend: Backend::External {
                program: program.into(),
                args,
            },
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub vars: u32,
    pub clauses: usize,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

/// Decides a formula. Exceeding the clause cap, the timeout or the
/// conflict budget yields `Unknown`.
pub fn solve(
    f: &CnfFormula,
    opts: &SolverOptions,
) -> Result<(SolveOutcome, SolveStats), EngineError> {
    let mut stats = SolveStats {
        vars: f.num_vars,
        clauses: f.clauses.len(),
        ..SolveStats::default()
    };
    if f.clauses.len() > opts.clause_cap {
        return Ok((SolveOutcome::Unknown, stats));
    }
    let timeout = Duration::from_secs_f64(opts.timeout_secs.max(0.0));
    match &opts.backend {
        Backend::Embedded => {
            let mut s = Solver::new(f.num_vars as usize);
            for c in &f.clauses {
                s.add_clause(c);
            }
            let r = s.solve(Limits {
                max_conflicts: opts.max_conflicts,
                deadline: Some(Instant::now() + timeout),
            });
            stats.conflicts = s.stats.conflicts;
            stats.decisions = s.stats.decisions;
            stats.propagations = s.stats.propagations;
            let r = match r {
                SolveOutcome::Sat(mut m) => {
                    m.resize(f.num_vars as usize + 1, false);
                    SolveOutcome::Sat(m)
                }
                other => other,
            };
            Ok((r, stats))
        }
        Backend::External { program, args } => {
            let r = run_external(f, program, args, timeout)?;
            Ok((r, stats))
        }
    }
}

fn run_external(
    f: &CnfFormula,
    program: &PathBuf,
    args: &[String],
    timeout: Duration,
) -> Result<SolveOutcome, EngineError> {
    let fail = |m: String| EngineError::Backend(m);
    let mut file = tempfile::Builder::new()
        .suffix(".cnf")
        .tempfile()
        .map_err(|e| fail(format!("temporary file: {e}")))?;
    file.write_all(f.to_dimacs().as_bytes())
        .map_err(|e| fail(format!("writing CNF: {e}")))?;
    file.flush()
        .map_err(|e| fail(format!("writing CNF: {e}")))?;
    let mut child = Command::new(program)
        .args(args)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| fail(format!("starting {}: {e}", program.display())))?;
    let mut out = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        out.read_to_string(&mut s).map(|_| s)
    });
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolveOutcome::Unknown);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(fail(format!("waiting for solver: {e}"))),
        }
    }
    let text = reader
        .join()
        .map_err(|_| fail("output reader panicked".into()))?
        .map_err(|e| fail(format!("reading solver output: {e}")))?;
    parse_solver_output(f, &text)
}

/// Parses `s ...` and `v ...` lines and checks any model against `f`.
fn parse_solver_output(f: &CnfFormula, text: &str) -> Result<SolveOutcome, EngineError> {
    let mut status = None;
    let mut model = vec![false; f.num_vars as usize + 1];
    for line in text.lines() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix("s ") {
            status = Some(s.trim().to_string());
        } else if let Some(v) = line.strip_prefix("v ") {
            for tok in v.split_whitespace() {
                let l: i64 = tok
                    .parse()
                    .map_err(|_| EngineError::Backend(format!("bad model literal `{tok}`")))?;
                let var = l.unsigned_abs() as usize;
                if var > f.num_vars as usize {
                    return Err(EngineError::Backend(format!(
                        "model literal {l} out of range"
                    )));
                }
                if var != 0 {
                    model[var] = l > 0;
                }
            }
        }
    }
    match status.as_deref() {
        Some("SATISFIABLE") => {
            if !f.satisfied_by(&model) {
                return Err(EngineError::Backend(
                    "reported model does not satisfy the formula".into(),
                ));
            }
            Ok(SolveOutcome::Sat(model))
        }
        Some("UNSATISFIABLE") => Ok(SolveOutcome::Unsat),
        Some("UNKNOWN") => Ok(SolveOutcome::Unknown),
        Some(other) => Err(EngineError::Backend(format!(
            "unrecognized status `{other}`"
        ))),
        None => Err(EngineError::Backend(
            "no status line in solver output".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f() -> CnfFormula {
        CnfFormula {
            num_vars: 2,
            clauses: vec![vec![1, 2], vec![-1]],
            ..CnfFormula::default()
        }
    }

    #[test]
    fn output_parsing() {
        assert!(matches!(
            parse_solver_output(&f(), "c hi\ns SATISFIABLE\nv -1 2 0\n").unwrap(),
            SolveOutcome::Sat(_)
        ));
        assert_eq!(
            parse_solver_output(&f(), "s UNSATISFIABLE\n").unwrap(),
            SolveOutcome::Unsat
        );
    }

    #[test]
    fn wrong_model_is_rejected() {
        assert!(parse_solver_output(&f(), "s SATISFIABLE\nv 1 2 0\n").is_err());
        assert!(parse_solver_output(&f(), "garbage\n").is_err());
        assert!(parse_solver_output(&f(), "s SATISFIABLE\nv 7 0\n").is_err());
    }

    #[test]
    fn missing_program_is_an_error() {
        let opts = SolverOptions::external("/nonexistent/solver", vec![]);
        assert!(solve(&f(), &opts).is_err());
    }

    #[test]
    fn clause_cap_gives_unknown() {
        let opts = SolverOptions {
            clause_cap: 1,
            ..SolverOptions::default()
        };
        assert_eq!(solve(&f(), &opts).unwrap().0, SolveOutcome::Unknown);
    }
}
