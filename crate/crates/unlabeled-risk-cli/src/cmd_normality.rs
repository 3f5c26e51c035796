use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use unlabeled_risk::core::{LabelMarginals, margins_batch};
use unlabeled_risk::diagnostics::{NormalityModel, histogram_export, normality_check};
use unlabeled_risk::mixture::{FitConfig, fit_fixed_weight_mixture};

use crate::common::{CliResult, DataArgs, RunManifest, load_theta, write_output};

/// Check the margin-normality assumption: fit the fixed-weight mixture to
/// the margins and report the KS distance, optionally exporting a
/// histogram/density overlay.
#[derive(Debug, Args)]
pub struct NormalityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Classifier weights, one per line
    #[arg(long)]
    pub theta: PathBuf,
    /// Known p(Y = 1)
    #[arg(long)]
    pub py1: f64,
    /// Standardize values before the histogram export
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Histogram CSV path (omit to skip the export)
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: &NormalityArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start(
        "normality",
        json!({
            "data": args.data.data.display().to_string(),
            "theta": args.theta.display().to_string(),
            "py1": args.py1,
            "standardize": args.standardize,
            "bins": args.bins,
        }),
        Some(args.seed),
    );
    manifest.record_input(&args.data.data)?;
    manifest.record_input(&args.theta)?;

    let dataset = crate::common::load_dataset(&args.data)?;
    let theta = load_theta(&args.theta)?;
    let marginals = LabelMarginals::binary(args.py1)?;
    marginals.require_identifiable()?;

    let margins = margins_batch(&theta, dataset.samples())?;
    let fit = fit_fixed_weight_mixture(
        &margins,
        &marginals,
        &FitConfig {
            seed: args.seed,
            ..FitConfig::default()
        },
    )?;
    let model = NormalityModel::Mixture(fit.clone());
    let report = normality_check(&margins, &model, args.standardize)?;

    if let Some(hist_path) = &args.hist_out {
        if let Some(parent) = hist_path.parent()
            && !parent.as_os_str().is_empty()
        {
            std::fs::create_dir_all(parent).ok();
        }
        histogram_export(&margins, &model, args.bins, args.standardize, hist_path)?;
        manifest.record_output(hist_path);
    }

    let value = json!({
        "ks_statistic": report.ks_statistic,
        "ks_sqrt_n": report.ks_sqrt_n,
        "n": report.n,
        "standardized": report.standardized,
        "model": {
            "mu": {"1": fit.mean(1).unwrap(), "-1": fit.mean(-1).unwrap()},
            "sigma": {"1": fit.std(1).unwrap(), "-1": fit.std(-1).unwrap()},
            "loglik": fit.loglik,
            "converged": fit.converged,
        },
    });
    println!("{value:#}");
    let report_path = args.out_dir.join("normality.json");
    write_output(&report_path, &format!("{value:#}\n"))?;
    manifest.record_output(&report_path);
    manifest.write(&args.out_dir)?;
    Ok(())
}
