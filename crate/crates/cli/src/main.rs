//! `compulse`: train, test and aggregate composite-pulse campaigns.

mod config;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::run::TestConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "compulse", version, about = "Supervised training of robust composite pulses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a run config and write params, trace, profile and summary.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-score learned parameters over an error scan.
    Test {
        #[arg(long)]
        params: PathBuf,
        /// Scan settings (`{"test": {...}, "scan_2d": {...}}`); defaults to [-0.1, 0.1].
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate finished runs matched by a glob into one table and a histogram.
    Sweep {
        /// Glob of run directories or summary files.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, seed, jobs, out } => {
            let cfg = RunConfig::load(&config)?.resolve(seed, jobs, out)?;
            set_jobs(cfg.jobs)?;
            let dir = run::default_out(&cfg);
            let s = run::train(&cfg, &dir)?;
            println!(
                "{}: F̄ = {:.8}, G = {:.3e}, accepted {}/{} ({:.1}%)",
                dir.display(),
                s.average_fidelity,
                s.generalization_error,
                s.acceptance.accepted,
                s.acceptance.runs,
                100.0 * s.acceptance.fraction
            );
        }
        Command::Test { params, config, out } => {
            let p = run::load_params(&params)?;
            let scan = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<TestConfig>(&text)
                        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
                }
                None => TestConfig {
                    test: compulse::metrics::ScanSpec::new(compulse::metrics::Interval::symmetric(0.1)),
                    scan_2d: None,
                },
            };
            let s = run::test(&p, &scan, &out)?;
            println!("F̄ = {:.8}, G = {:.3e}, W = {:?}", s.average_fidelity, s.generalization_error, s.robust_width);
        }
        Command::Sweep { config, out } => {
            let s = sweep::collect(&config)?;
            sweep::write(&s, &out)?;
            println!("{} rows, histogram {:?}, {} missing", s.rows.len(), s.histogram, s.missing.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
