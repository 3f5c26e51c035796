//! Empirical checks of the normality assumption: a Kolmogorov-Smirnov
//! statistic of the margins against the fitted model and exportable
//! histogram/density overlays.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::core::MarginValues;
use crate::error::{Error, Result};
use crate::mixture::MixtureFit;
use crate::numeric::{normal_cdf, normal_pdf};

/// The reference model a sample is compared against.
#[derive(Debug, Clone)]
pub enum NormalityModel {
    Mixture(MixtureFit),
    Gaussian { mean: f64, std: f64 },
}

impl NormalityModel {
    fn validate(&self) -> Result<()> {
        match self {
            NormalityModel::Mixture(fit) => {
                for c in fit.components() {
                    if c.std <= 0.0 || c.std.is_nan() || !c.mean.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "mixture component for class {} is degenerate",
                            c.class
                        )));
                    }
                }
                Ok(())
            }
            NormalityModel::Gaussian { mean, std } => {
                if *std <= 0.0 || std.is_nan() || !mean.is_finite() {
                    return Err(Error::InvalidParameter(
                        "Gaussian model needs a finite mean and positive std".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            NormalityModel::Mixture(fit) => fit.cdf(x),
            NormalityModel::Gaussian { mean, std } => normal_cdf(x, *mean, *std),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self {
            NormalityModel::Mixture(fit) => fit.pdf(x),
            NormalityModel::Gaussian { mean, std } => normal_pdf(x, *mean, *std),
        }
    }

    /// The model for affinely transformed data (x - shift) / scale.
    fn transformed(&self, shift: f64, scale: f64) -> NormalityModel {
        match self {
            NormalityModel::Mixture(fit) => {
                let params: Vec<(i32, f64, f64)> = fit
                    .components()
                    .iter()
                    .map(|c| (c.class, (c.mean - shift) / scale, c.std / scale))
                    .collect();
                NormalityModel::Mixture(
                    MixtureFit::from_params(fit.marginals().clone(), &params)
                        .expect("transform keeps parameters valid"),
                )
            }
            NormalityModel::Gaussian { mean, std } => NormalityModel::Gaussian {
                mean: (mean - shift) / scale,
                std: std / scale,
            },
        }
    }
}

/// Outcome of the KS comparison. No p-value is reported: with fitted
/// parameters the classical null distribution is conservative, so only
/// the raw statistic and its sqrt(n)-scaled value are given.
#[derive(Debug, Clone)]
pub struct NormalityReport {
    pub ks_statistic: f64,
    /// ks_statistic * sqrt(n), the scale on which the statistic is
    /// stochastically bounded when the model is right.
    pub ks_sqrt_n: f64,
    pub n: usize,
    pub model: NormalityModel,
    pub standardized: bool,
}

const KS_MIN_SAMPLES: usize = 20;

/// sup_x |F_empirical(x) - F_model(x)| against the model CDF.
pub fn normality_check(
    values: &MarginValues,
    model: &NormalityModel,
    standardized: bool,
) -> Result<NormalityReport> {
    let n = values.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            need: KS_MIN_SAMPLES,
            got: n,
        });
    }
    model.validate()?;
    let mut sorted: Vec<f64> = values.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = model.cdf(x);
        let below = i as f64 / nf;
        let above = (i + 1) as f64 / nf;
        d = d.max((f - below).abs()).max((above - f).abs());
    }
    Ok(NormalityReport {
        ks_statistic: d,
        ks_sqrt_n: d * nf.sqrt(),
        n,
        model: model.clone(),
        standardized,
    })
}

/// One exported histogram row.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub bin_center: f64,
    pub empirical_density: f64,
    pub model_density: f64,
}

/// Equal-width histogram of the values over their range, next to the
/// model density at the bin centers. With `standardize` set, the values
/// get the empirical mean subtracted and are divided by the empirical
/// (population) standard deviation, and the model is transformed to
/// match.
pub fn histogram_table(
    values: &MarginValues,
    model: &NormalityModel,
    bins: usize,
    standardize: bool,
) -> Result<Vec<HistogramRow>> {
    if values.is_empty() {
        return Err(Error::EmptyInput {
            context: "histogram values",
        });
    }
    if bins < 5 {
        return Err(Error::InvalidParameter(
            "histograms need at least 5 bins".into(),
        ));
    }
    model.validate()?;

    let n = values.len() as f64;
    let mut data: Vec<f64> = values.values().to_vec();
    let mut model = model.clone();
    if standardize {
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 {
            return Err(Error::DegenerateData(
                "cannot standardize constant values".into(),
            ));
        }
        for v in &mut data {
            *v = (*v - mean) / std;
        }
        model = model.transformed(mean, std);
    }

    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::DegenerateData(
            "all values identical; histogram width is zero".into(),
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &data {
        let mut idx = ((v - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1; // the maximum lands in the last bin
        }
        counts[idx] += 1;
    }
    let rows = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let center = lo + width * (i as f64 + 0.5);
            HistogramRow {
                bin_center: center,
                empirical_density: count as f64 / (n * width),
                model_density: model.pdf(center),
            }
        })
        .collect();
    Ok(rows)
}

/// Writes the histogram table as CSV with header
/// `bin_center,empirical_density,model_density`.
pub fn histogram_export(
    values: &MarginValues,
    model: &NormalityModel,
    bins: usize,
    standardize: bool,
    path: &Path,
) -> Result<()> {
    let rows = histogram_table(values, model, bins, standardize)?;
    let mut out = String::from("bin_center,empirical_density,model_density\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.bin_center, r.empirical_density, r.model_density
        )
        .expect("string write");
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
