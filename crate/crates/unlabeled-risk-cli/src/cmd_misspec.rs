use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use unlabeled_risk::core::{LabelMarginals, Sample};
use unlabeled_risk::risk::{LossSpec, empirical_risk};
use unlabeled_risk::train::error_rate;

use crate::cmd_train::{TrainArgs, train_with_args};
use crate::common::{CliError, CliResult, DataArgs, RunManifest, load_theta, write_output};

/// Sweep the assumed p(Y=1) and report supervised metrics from held-out
/// labels, showing how misspecified priors degrade the learned classifier.
#[derive(Debug, Args)]
pub struct MisspecArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated assumed values of p(Y = 1)
    #[arg(long, value_delimiter = ',')]
    pub py1_grid: Vec<f64>,
    /// Evaluate this fixed classifier instead of training per grid point
    #[arg(long)]
    pub theta: Option<PathBuf>,
}

pub fn run(args: &MisspecArgs) -> CliResult<()> {
    let loss: LossSpec = args.train.loss.parse()?;
    if !loss.is_binary() {
        return Err(CliError::Config(format!(
            "the sweep uses binary losses, got {}",
            loss.name()
        )));
    }
    if args.py1_grid.is_empty() {
        return Err(CliError::Config(
            "--py1-grid needs at least one value".into(),
        ));
    }
    let eval_path = args.train.eval_data.clone().ok_or_else(|| {
        CliError::Config("--eval-data with true labels is required for the sweep".into())
    })?;

    let mut manifest = RunManifest::start(
        "misspec-sweep",
        json!({
            "data": args.train.data.data.display().to_string(),
            "eval_data": eval_path.display().to_string(),
            "py1_grid": args.py1_grid,
            "loss": loss.name(),
            "algo": format!("{:?}", args.train.algo),
            "theta": args.theta.as_ref().map(|p| p.display().to_string()),
        }),
        Some(args.train.seed),
    );
    manifest.record_input(&args.train.data.data)?;
    manifest.record_input(&eval_path)?;

    let dataset = crate::common::load_dataset(&args.train.data)?;
    let train_samples: Vec<Sample> = dataset.samples().iter().map(Sample::strip_label).collect();
    let eval_args = DataArgs {
        data: eval_path,
        labeled: true,
        ..args.train.data.clone()
    };
    let eval = crate::common::load_dataset(&eval_args)?;
    if !eval.labeled() {
        return Err(CliError::Data("--eval-data must carry true labels".into()));
    }
    let fixed_theta = match &args.theta {
        Some(path) => {
            manifest.record_input(path)?;
            Some(load_theta(path)?)
        }
        None => None,
    };

    let mut csv = String::from("assumed_p,risk_sup,error_rate\n");
    for &assumed in &args.py1_grid {
        match sweep_point(
            args,
            &train_samples,
            eval.samples(),
            loss,
            assumed,
            &fixed_theta,
        ) {
            Ok((risk_sup, err)) => {
                writeln!(csv, "{assumed},{risk_sup},{err}").expect("string write");
            }
            Err(SweepFailure::Row(msg)) => {
                eprintln!("assumed_p={assumed}: {msg}");
                writeln!(csv, "{assumed},,").expect("string write");
            }
            Err(SweepFailure::Fatal(e)) => return Err(e),
        }
    }

    let sweep_path = args.train.out_dir.join("misspec.csv");
    write_output(&sweep_path, &csv)?;
    manifest.record_output(&sweep_path);
    manifest.write(&args.train.out_dir)?;
    print!("{csv}");
    Ok(())
}

enum SweepFailure {
    /// Recorded as an empty row; the sweep continues.
    Row(String),
    Fatal(CliError),
}

fn sweep_point(
    args: &MisspecArgs,
    train_samples: &[Sample],
    eval_samples: &[Sample],
    loss: LossSpec,
    assumed: f64,
    fixed_theta: &Option<unlabeled_risk::core::ClassifierParams>,
) -> Result<(f64, f64), SweepFailure> {
    let marginals =
        LabelMarginals::binary(assumed).map_err(|e| SweepFailure::Row(e.to_string()))?;
    marginals
        .require_identifiable()
        .map_err(|e| SweepFailure::Row(e.to_string()))?;
    let theta = match fixed_theta {
        Some(t) => t.clone(),
        None => {
            train_with_args(&args.train, train_samples, &marginals, loss, None)
                .map_err(|e| match e {
                    // statistical failures at one prior should not kill
                    // the other grid points
                    CliError::Numeric(msg) => SweepFailure::Row(msg),
                    other => SweepFailure::Fatal(other),
                })?
                .theta
        }
    };
    let risk_sup = empirical_risk(eval_samples, &theta, loss)
        .map_err(|e| SweepFailure::Fatal(e.into()))?
        .estimate;
    let err = error_rate(&theta, eval_samples).map_err(|e| SweepFailure::Fatal(e.into()))?;
    Ok((risk_sup, err))
}
