use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use unlabeled_risk::core::{LabelMarginals, Sample};
use unlabeled_risk::mixture::FitConfig;
use unlabeled_risk::risk::LossSpec;
use unlabeled_risk::train::{
    GradDescentConfig, GridSearchConfig, RefitMode, TrainResult, train_gradient_descent,
    train_grid_search,
};

use crate::common::{CliError, CliResult, DataArgs, RunManifest, write_output, write_theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Grad,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Refit {
    Warm,
    Cold,
    Frozen,
}

impl From<Refit> for RefitMode {
    fn from(r: Refit) -> Self {
        match r {
            Refit::Warm => RefitMode::WarmStart,
            Refit::Cold => RefitMode::Cold,
            Refit::Frozen => RefitMode::FrozenFit,
        }
    }
}

/// Train a classifier by minimizing the unsupervised risk estimate.
#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Known p(Y = 1)
    #[arg(long)]
    pub py1: f64,
    #[arg(long, default_value = "log")]
    pub loss: String,
    #[arg(long, value_enum, default_value = "grad")]
    pub algo: Algo,
    /// Held-out labeled data for the supervised trace columns (same
    /// format and dimension as --data; csv labels in the last column
    /// unless --label-col is given)
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gradient step size (grad)
    #[arg(long, default_value_t = 1.0)]
    pub step_size: f64,
    /// Iteration cap (grad) / sweep cap (grid)
    #[arg(long, default_value_t = 60)]
    pub iters: usize,
    /// Relative improvement below which training stops (grad)
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Mixture refit policy for perturbed evaluations (grad)
    #[arg(long, value_enum, default_value = "warm")]
    pub refit: Refit,
    /// Grid points per coordinate (grid; odd)
    #[arg(long, default_value_t = 17)]
    pub grid_points: usize,
    /// Half-width of the per-coordinate window (grid)
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    /// Window shrink factor after an unchanged sweep (grid)
    #[arg(long, default_value_t = 0.5)]
    pub shrink: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn load_eval_set(args: &TrainArgs) -> CliResult<Option<Vec<Sample>>> {
    match &args.eval_data {
        None => Ok(None),
        Some(path) => {
            let eval_args = DataArgs {
                data: path.clone(),
                labeled: true,
                ..args.data.clone()
            };
            let eval = crate::common::load_dataset(&eval_args)?;
            if !eval.labeled() {
                return Err(CliError::Data(format!(
                    "--eval-data {} must be labeled",
                    path.display()
                )));
            }
            Ok(Some(eval.samples().to_vec()))
        }
    }
}

pub fn train_with_args(
    args: &TrainArgs,
    samples: &[Sample],
    marginals: &LabelMarginals,
    loss: LossSpec,
    eval_set: Option<&[Sample]>,
) -> CliResult<TrainResult> {
    let fit = FitConfig {
        seed: args.seed,
        ..FitConfig::default()
    };
    let result = match args.algo {
        Algo::Grad => {
            let config = GradDescentConfig {
                step_size: args.step_size,
                max_iterations: args.iters,
                tolerance: args.tol,
                seed: args.seed,
                refit: args.refit.into(),
                fit,
                ..GradDescentConfig::default()
            };
            train_gradient_descent(samples, marginals, loss, &config, None, eval_set)?
        }
        Algo::Grid => {
            let config = GridSearchConfig {
                grid_points: args.grid_points,
                window: args.window,
                shrink: args.shrink,
                max_sweeps: args.iters,
                seed: args.seed,
                fit,
                ..GridSearchConfig::default()
            };
            train_grid_search(samples, marginals, loss, &config, eval_set)?
        }
    };
    Ok(result)
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let loss: LossSpec = args.loss.parse()?;
    if !loss.is_binary() {
        return Err(CliError::Config(format!(
            "the CLI trains binary classifiers, got loss {}",
            loss.name()
        )));
    }
    let mut manifest = RunManifest::start(
        "train",
        json!({
            "data": args.data.data.display().to_string(),
            "py1": args.py1,
            "loss": loss.name(),
            "algo": format!("{:?}", args.algo),
            "step_size": args.step_size,
            "iters": args.iters,
            "tol": args.tol,
            "refit": format!("{:?}", args.refit),
            "grid_points": args.grid_points,
            "window": args.window,
            "shrink": args.shrink,
            "eval_data": args.eval_data.as_ref().map(|p| p.display().to_string()),
        }),
        Some(args.seed),
    );
    manifest.record_input(&args.data.data)?;
    if let Some(path) = &args.eval_data {
        manifest.record_input(path)?;
    }

    let dataset = crate::common::load_dataset(&args.data)?;
    let marginals = LabelMarginals::binary(args.py1)?;
    marginals.require_identifiable()?;
    let train_samples: Vec<Sample> = dataset.samples().iter().map(Sample::strip_label).collect();
    let eval_set = load_eval_set(args)?;

    let result = train_with_args(args, &train_samples, &marginals, loss, eval_set.as_deref())?;

    let theta_path = args.out_dir.join("theta.txt");
    write_theta(&result.theta, &theta_path)?;
    let trace_path = args.out_dir.join("trace.csv");
    write_output(&trace_path, &result.trace.to_csv())?;
    manifest.record_output(&theta_path);
    manifest.record_output(&trace_path);
    manifest.write(&args.out_dir)?;

    let last = result.trace.records.last();
    let summary = json!({
        "status": format!("{:?}", result.status),
        "iterations": result.trace.records.len().saturating_sub(1),
        "final_risk_unsup": last.map(|r| r.risk_unsup),
        "final_error_rate": last.and_then(|r| r.error_rate),
        "skipped_evals": result.skipped_evals.len(),
        "theta": theta_path.display().to_string(),
        "trace": trace_path.display().to_string(),
    });
    println!("{summary:#}");
    Ok(())
}
