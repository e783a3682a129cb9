use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use capcheck::cli::{
    cmd_check, cmd_dump_core, cmd_flow, cmd_oracle, solve_dimacs_file, CliError, RunConfig,
    EXIT_ERROR, PROPERTIES,
};
use capcheck::engine::Backend;

#[derive(Parser)]
#[command(
    name = "capcheck",
    version,
    about = "Security checks for a capability processor model"
)]
struct Cli {
    /// Solve with an external DIMACS solver instead of the embedded one.
    #[arg(long, global = true, value_name = "PROGRAM")]
    external_solver: Option<PathBuf>,
    /// Extra argument for the external solver, before the CNF file.
    #[arg(long, global = true, value_name = "ARG", allow_hyphen_values = true)]
    solver_arg: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one property. Exit 0 holds, 1 fails, 2 unknown or error.
    Check {
        config: PathBuf,
        /// Property name; the config's `properties` list when omitted.
        property: Option<String>,
    },
    /// Run the full flow. Exit 0 secure, 1 vulnerable, 2 inconclusive.
    Flow { config: PathBuf },
    /// Compare the explicit-state oracle with the symbolic verdicts on
    /// the micro core. Exit 0 on agreement.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Print the configured system in text form.
    DumpCore { config: PathBuf },
    /// Solve a DIMACS file with the bundled reference solver.
    #[command(hide = true)]
    DimacsSolve { cnf: PathBuf },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let load = |p: &PathBuf| -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(p)?;
        if let Some(prog) = &cli.external_solver {
            cfg.solver.backend = Backend::External {
                program: prog.clone(),
                args: cli.solver_arg.clone(),
            };
        }
        Ok(cfg)
    };
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::Check { config, property } => {
            let cfg = load(config)?;
            let names = match property {
                Some(p) => vec![p.clone()],
                None => cfg.properties.clone(),
            };
            let mut code = 0;
            for n in names {
                code = code.max(cmd_check(&cfg, &n, &mut out)?);
            }
            Ok(code)
        }
        Command::Flow { config } => cmd_flow(&load(config)?, &mut out),
        Command::Oracle { config, depth } => {
            let cfg = load(config)?;
            let d = depth.unwrap_or(cfg.oracle_depth);
            cmd_oracle(&cfg, d, &mut out)
        }
        Command::DumpCore { config } => cmd_dump_core(&load(config)?, &mut out),
        Command::DimacsSolve { cnf } => {
            let answer = solve_dimacs_file(cnf)?;
            let _ = out.write_all(answer.as_bytes());
            Ok(if answer.starts_with("s SAT") { 10 } else { 20 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::UnknownProperty(_) = e {
                eprintln!("properties: {}", PROPERTIES.join(", "));
                eprintln!("usage: capcheck check <CONFIG> [PROPERTY]");
            }
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
