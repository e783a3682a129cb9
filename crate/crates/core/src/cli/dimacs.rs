use std::path::Path;

use varisat::Solver;

use super::CliError;

/// Solves a DIMACS file and answers in the competition output format.
pub fn solve_dimacs_file(path: &Path) -> Result<String, CliError> {
    let io = |e: String| CliError::Io {
        path: path.display().to_string(),
        msg: e,
    };
    let file = std::fs::File::open(path).map_err(|e| io(e.to_string()))?;
    let mut solver = Solver::new();
    solver.add_dimacs_cnf(file).map_err(|e| io(e.to_string()))?;
    let sat = solver.solve().map_err(|e| io(e.to_string()))?;
    if !sat {
        return Ok("s UNSATISFIABLE\n".into());
    }
    let mut out = String::from("s SATISFIABLE\nv");
    for l in solver.model().unwrap_or_default() {
        out.push(' ');
        out.push_str(&l.to_dimacs().to_string());
    }
    out.push_str(" 0\n");
    Ok(out)
}
