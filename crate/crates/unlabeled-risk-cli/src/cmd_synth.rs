use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use unlabeled_risk::data::{SynthConfig, SynthFamily, generate_synthetic, write_dense_csv};

use crate::common::{CliResult, RunManifest, write_theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Uniform,
    Gaussian,
}

/// Generate labeled synthetic data with a prescribed prior and reference
/// classifier accuracy. Outputs are byte-identical for a fixed seed.
#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// p(Y = 1)
    #[arg(long)]
    pub py1: f64,
    /// Target accuracy of the reference classifier, in (0.5, 1)
    #[arg(long)]
    pub accuracy: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub family: Family,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start(
        "synth",
        json!({
            "dim": args.dim,
            "n": args.n,
            "py1": args.py1,
            "accuracy": args.accuracy,
            "family": format!("{:?}", args.family),
        }),
        Some(args.seed),
    );
    let config = SynthConfig {
        dim: args.dim,
        n: args.n,
        p_pos: args.py1,
        target_accuracy: args.accuracy,
        family: match args.family {
            Family::Uniform => SynthFamily::UniformShift,
            Family::Gaussian => SynthFamily::GaussianShift,
        },
        seed: args.seed,
    };
    let synth = generate_synthetic(&config)?;

    let data_path = args.out_dir.join("data.csv");
    if let Some(parent) = data_path.parent() {
        std::fs::create_dir_all(parent).ok();
    }
    write_dense_csv(&synth.dataset, &data_path)?;
    let theta_path = args.out_dir.join("theta_ref.txt");
    write_theta(&synth.theta_ref, &theta_path)?;
    manifest.record_output(&data_path);
    manifest.record_output(&theta_path);
    manifest.write(&args.out_dir)?;

    let summary = json!({
        "delta": synth.delta,
        "n": synth.dataset.len(),
        "dim": synth.dataset.dim(),
        "data": data_path.display().to_string(),
        "theta_ref": theta_path.display().to_string(),
    });
    println!("{summary:#}");
    Ok(())
}
