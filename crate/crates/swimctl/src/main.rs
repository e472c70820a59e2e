use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use swimctl::{ConfigError, Flags, Resolved, RunConfig};

/// Energy-optimal strokes of axisymmetric microswimmers.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the optimal stroke and write its artifacts.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Report energy and displacement of a stored stroke.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// `stroke.csv` or `stroke_coefficients.csv` from an earlier run.
        #[arg(long)]
        stroke: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` of the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Perturbs the initial stroke; 0 keeps it as constructed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream the solver iterations to this CSV file.
    #[arg(long)]
    log_csv: Option<PathBuf>,
    /// Also write the boundary operators at t = 0.
    #[arg(long)]
    dump_operators: bool,
}

impl RunArgs {
    fn flags(&self) -> Flags {
        Flags { out_dir: self.out_dir.clone(), seed: self.seed, log_csv: self.log_csv.clone(), dump_operators: self.dump_operators }
    }
}

const NOT_CONVERGED: u8 = 2;
const INVALID_CONFIG: u8 = 3;

fn load(path: &PathBuf) -> Result<Resolved, ConfigError> {
    RunConfig::load(path)?.resolve()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (args, stroke) = match &cli.command {
        Command::Validate { config } => {
            return Ok(match load(config) {
                Ok(resolved) => {
                    println!("{}", serde_json::to_string_pretty(&resolved.config)?);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(INVALID_CONFIG)
                }
            });
        }
        Command::Optimize { run } => (run, None),
        Command::Evaluate { run, stroke } => (run, Some(stroke)),
    };
    let resolved = match load(&args.config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(INVALID_CONFIG));
        }
    };
    let outcome = match stroke {
        None => swimctl::optimize(&resolved, &args.flags())?,
        Some(file) => swimctl::evaluate(&resolved, file, &args.flags())?,
    };
    let r = &outcome.report;
    println!("energy {:.6e} pJ, displacement {:.6e} mm", r.energy_pj, r.displacement_mm);
    if let Some(s) = &r.solver {
        println!("{} after {} iterations, KKT residual {:.3e}", s.status, s.iterations, s.kkt_residual);
    }
    println!("artifacts in {}", outcome.out_dir.display());
    Ok(if r.converged { ExitCode::SUCCESS } else { ExitCode::from(NOT_CONVERGED) })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
