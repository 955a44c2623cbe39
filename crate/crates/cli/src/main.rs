mod config;
mod run;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] locc_spectrum::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "locc-spectrum", version, about = "Seeded Monte Carlo experiments for two-stage adaptive spectrum estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Single adaptive estimation run
    Estimate,
    /// Monte Carlo MSE matrix against the QCRB over an N grid
    BenchQcrb,
    /// Scaled squared bias of the first stage over an N grid and μ list
    SweepMu,
    /// Randomized check of the eigenvalue perturbation lemma
    VerifyLemma1,
    /// Chernoff grid and tail bound against empirical tail frequencies
    VerifyTails,
    /// Entanglement entropy estimation from one reduced state
    Entangle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::BenchQcrb => "bench-qcrb",
            Command::SweepMu => "sweep-mu",
            Command::VerifyLemma1 => "verify-lemma1",
            Command::VerifyTails => "verify-tails",
            Command::Entangle => "entangle",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match ExperimentConfig::resolve(cli.command.name(), &cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run::run(&cfg) {
        Ok(run::Outcome::Passed) => ExitCode::SUCCESS,
        Ok(run::Outcome::SuiteFailed(why)) => {
            eprintln!("suite failed: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
