//! Command-line front end for unsupervised risk estimation and label-free
//! training of linear classifiers.

mod cmd_asymvar;
mod cmd_estimate;
mod cmd_misspec;
mod cmd_normality;
mod cmd_synth;
mod cmd_train;
mod common;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::common::CliError;

#[derive(Parser)]
#[command(
    name = "unlabeled-risk",
    version,
    about = "Estimate margin-based classifier risk from unlabeled data with a known class prior, \
             and train classifiers by minimizing the estimate",
    after_help = "Exit codes: 1 configuration error, 2 data error, 3 numerical failure."
)]
struct Cli {
    /// Cap on worker threads (fallback: UNLABELED_RISK_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a classifier's risk from (optionally labeled) data
    EstimateRisk(cmd_estimate::EstimateArgs),
    /// Train a classifier on unlabeled data
    Train(cmd_train::TrainArgs),
    /// Sweep misspecified priors and report held-out metrics
    MisspecSweep(cmd_misspec::MisspecArgs),
    /// Asymptotic-accuracy table along a parameter axis
    Asymvar(cmd_asymvar::AsymvarArgs),
    /// Kolmogorov-Smirnov check of the margin-normality assumption
    Normality(cmd_normality::NormalityArgs),
    /// Generate calibrated synthetic data
    Synth(cmd_synth::SynthArgs),
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var("UNLABELED_RISK_THREADS") {
        Ok(value) => value.parse::<usize>().map(Some).map_err(|_| {
            CliError::Config(format!(
                "UNLABELED_RISK_THREADS={value:?} is not a thread count"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = resolve_threads(cli.threads)? {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::EstimateRisk(args) => cmd_estimate::run(args),
        Command::Train(args) => cmd_train::run(args),
        Command::MisspecSweep(args) => cmd_misspec::run(args),
        Command::Asymvar(args) => cmd_asymvar::run(args),
        Command::Normality(args) => cmd_normality::run(args),
        Command::Synth(args) => cmd_synth::run(args),
    }
}

fn main() {
    // missing/invalid flags are configuration errors (exit 1), not clap's
    // default usage exit code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit()
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = dispatch(&cli) {
        let payload = json!({
            "error": {
                "category": e.category(),
                "message": e.message(),
            }
        });
        eprintln!("{payload}");
        std::process::exit(e.exit_code());
    }
}
