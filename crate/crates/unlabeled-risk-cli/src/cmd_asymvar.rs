use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use unlabeled_risk::asymptotics::{SurfaceAxis, SurfaceConfig, accuracy_surface, surface_to_csv};
use unlabeled_risk::risk::LossSpec;

use crate::common::{CliError, CliResult, RunManifest, write_output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// p(Y = 1) varies
    Imbalance,
    /// |mu_1 - mu_{-1}| varies, means centered on zero
    Separation,
    /// sigma_{+1} / sigma_{-1} varies
    SigmaRatio,
}

/// Asymptotic accuracy (inverse delta-method variance) along one
/// parameter axis; gnuplot-ready CSV.
#[derive(Debug, Args)]
pub struct AsymvarArgs {
    #[arg(long, value_enum, default_value = "imbalance")]
    pub axis: Axis,
    /// Comma-separated grid; defaults depend on the axis
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Base p(Y = 1) for the non-imbalance axes
    #[arg(long, default_value_t = 0.7)]
    pub py1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_pos: f64,
    #[arg(long, default_value_t = -1.0)]
    pub mu_neg: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_pos: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_neg: f64,
    #[arg(long, default_value = "log")]
    pub loss: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn default_grid(axis: Axis) -> Vec<f64> {
    match axis {
        Axis::Imbalance => (0..9).map(|i| 0.55 + 0.05 * i as f64).collect(),
        Axis::Separation => (0..7).map(|i| 1.0 + 0.5 * i as f64).collect(),
        Axis::SigmaRatio => (0..7).map(|i| 0.5 + 0.5 * i as f64).collect(),
    }
}

pub fn run(args: &AsymvarArgs) -> CliResult<()> {
    let loss: LossSpec = args.loss.parse()?;
    if !loss.is_binary() {
        return Err(CliError::Config(format!(
            "asymptotic accuracy is defined for binary losses, got {}",
            loss.name()
        )));
    }
    let grid = if args.grid.is_empty() {
        default_grid(args.axis)
    } else {
        args.grid.clone()
    };
    let mut manifest = RunManifest::start(
        "asymvar",
        json!({
            "axis": format!("{:?}", args.axis),
            "grid": grid,
            "py1": args.py1,
            "mu": [args.mu_pos, args.mu_neg],
            "sigma": [args.sigma_pos, args.sigma_neg],
            "loss": loss.name(),
        }),
        None,
    );

    let axis = match args.axis {
        Axis::Imbalance => SurfaceAxis::Imbalance { p_values: grid },
        Axis::Separation => SurfaceAxis::MeanSeparation { separations: grid },
        Axis::SigmaRatio => SurfaceAxis::SigmaRatio { ratios: grid },
    };
    let config = SurfaceConfig {
        axis,
        base_p_pos: args.py1,
        base_mu: (args.mu_pos, args.mu_neg),
        base_sigma: (args.sigma_pos, args.sigma_neg),
        loss,
    };
    let points = accuracy_surface(&config)?;
    let csv = surface_to_csv(&points);

    let path = args.out_dir.join("accuracy.csv");
    write_output(&path, &csv)?;
    manifest.record_output(&path);
    manifest.write(&args.out_dir)?;
    print!("{csv}");
    Ok(())
}
