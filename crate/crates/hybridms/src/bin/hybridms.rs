//! Command-line entry point: offline basis construction, online solves,
//! equivalence checks, convergence studies and audits, all driven by a JSON
//! config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridms::config::{Experiment, RunConfig};
use hybridms::runner::{run, RunError};

#[derive(Parser)]
#[command(
    name = "hybridms",
    about = "Two-level multiscale hybrid solvers (MHM / MsHHO) on polygonal meshes",
    version
)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Basis cache file (overrides the config).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads for the offline stage; 0 = rayon default, 1 = serial.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the per-cell multiscale bases and write the cache.
    Offline,
    /// Solve the MHM saddle-point problem for every configured source.
    SolveMhm,
    /// Solve the condensed MsHHO problem for every configured source.
    SolveMshho,
    /// Solve the purely face-based MsHHO variant.
    SolveFacebased,
    /// Solve with both methods and report the energy-norm gap.
    Equivalence,
    /// Run convergence-rate studies against the fine reference.
    Convergence,
    /// Check solution characterizations (jumps, balances, flux continuity).
    Audit,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Offline => Experiment::Offline,
            Command::SolveMhm => Experiment::SolveMhm,
            Command::SolveMshho => Experiment::SolveMshho,
            Command::SolveFacebased => Experiment::SolveFacebased,
            Command::Equivalence => Experiment::Equivalence,
            Command::Convergence => Experiment::Convergence,
            Command::Audit => Experiment::Audit,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::from_path(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let experiment = cli.command.experiment();
    match run(experiment, cfg, cli.out, cli.cache, cli.threads) {
        Ok(outcome) => {
            println!(
                "{}: artifacts in {}",
                experiment.name(),
                outcome.out_dir.display()
            );
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: checks failed (see report.json)", experiment.name());
                ExitCode::from(3)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
