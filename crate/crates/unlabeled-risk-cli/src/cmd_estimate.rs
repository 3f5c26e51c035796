use std::path::PathBuf;

use clap::Args;
use serde_json::{Map, Value, json};
use unlabeled_risk::asymptotics::delta_method_risk_variance;
use unlabeled_risk::core::{LabelMarginals, margins_batch};
use unlabeled_risk::mixture::{FitConfig, fit_fixed_weight_mixture};
use unlabeled_risk::risk::{LossSpec, empirical_risk, plugin_risk};

use crate::common::{CliError, CliResult, DataArgs, RunManifest, load_theta, write_output};

/// Estimate a classifier's risk from unlabeled data and the class prior.
#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Classifier weights, one per line
    #[arg(long)]
    pub theta: PathBuf,
    /// Known p(Y = 1)
    #[arg(long)]
    pub py1: f64,
    /// Loss function
    #[arg(long, default_value = "log")]
    pub loss: String,
    /// EM restarts
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where the manifest lands
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: &EstimateArgs) -> CliResult<()> {
    let loss: LossSpec = args.loss.parse()?;
    if !loss.is_binary() {
        return Err(CliError::Config(format!(
            "the CLI estimates binary losses, got {}",
            loss.name()
        )));
    }
    let mut manifest = RunManifest::start(
        "estimate-risk",
        json!({
            "data": args.data.data.display().to_string(),
            "format": format!("{:?}", args.data.format),
            "theta": args.theta.display().to_string(),
            "py1": args.py1,
            "loss": loss.name(),
            "restarts": args.restarts,
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
    let fit_config = FitConfig {
        restarts: args.restarts,
        seed: args.seed,
        ..FitConfig::default()
    };
    let fit = fit_fixed_weight_mixture(&margins, &marginals, &fit_config)?;
    let report = plugin_risk(&fit, loss)?;

    let asympt_std = delta_method_risk_variance(&fit, loss)
        .ok()
        .map(|av| av.std_for_n(dataset.len()));

    let mut fields = Map::new();
    fields.insert("estimate".into(), json!(report.estimate));
    fields.insert("n".into(), json!(dataset.len()));
    fields.insert("p_y".into(), json!({"1": args.py1, "-1": 1.0 - args.py1}));
    fields.insert("loss".into(), json!(loss.name()));
    fields.insert(
        "mu".into(),
        json!({"1": fit.mean(1).unwrap(), "-1": fit.mean(-1).unwrap()}),
    );
    fields.insert(
        "sigma".into(),
        json!({"1": fit.std(1).unwrap(), "-1": fit.std(-1).unwrap()}),
    );
    fields.insert("asympt_std".into(), json!(asympt_std));
    if dataset.labeled() {
        let sup = empirical_risk(dataset.samples(), &theta, loss)?;
        let abs_err = (sup.estimate - report.estimate).abs();
        fields.insert("empirical".into(), json!(sup.estimate));
        fields.insert("abs_err".into(), json!(abs_err));
        fields.insert("rel_err".into(), json!(abs_err / sup.estimate));
    }
    let value = Value::Object(fields);
    println!("{value:#}");

    let report_path = args.out_dir.join("risk.json");
    write_output(&report_path, &format!("{value:#}\n"))?;
    manifest.record_output(&report_path);
    manifest.write(&args.out_dir)?;
    Ok(())
}
