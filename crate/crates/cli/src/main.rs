use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use poincare_chaos::experiment::{self, BasisSpec, ExperimentConfig, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "poincare-chaos", version, about = "Poincaré chaos expansions: experiments and basis export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run { config: PathBuf },
    /// Export univariate basis curves and the spectrum described by a JSON spec.
    Basis { spec: PathBuf },
    /// Print median errors and indices of a results directory.
    Report { dir: PathBuf },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Ok(n) = std::env::var(WORKERS_ENV) {
                eprintln!("workers: {n}");
            }
            let result = experiment::run_experiment(&cfg)?;
            println!(
                "{} records written to {}",
                result.records.len(),
                cfg.output_dir.join(experiment::RESULTS_FILE).display()
            );
            for f in &result.summary.failures {
                eprintln!(
                    "fit failed: {} ed={} replicate={} bootstrap={}: {}",
                    f.method, f.ed_size, f.replicate, f.bootstrap_id, f.error
                );
            }
            Ok(result.all_fits_succeeded())
        }
        Command::Basis { spec } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: BasisSpec = serde_json::from_str(&text)?;
            for p in experiment::export_basis(&spec)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Report { dir } => {
            print!("{}", experiment::report(&dir)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
