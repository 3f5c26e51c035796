//! Synthetic data generation with a prescribed class prior and reference
//! classifier accuracy, plus dense-CSV and sparse-text ingestion.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{ClassifierParams, Sample};
use crate::error::{Error, Result};

/// Feature family of the synthetic generator. Both shift the per-class
/// feature distributions apart by a calibrated offset delta along every
/// dimension: class y gets center y * delta / 2, so the reference
/// classifier's margin components straddle zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthFamily {
    /// Features uniform on (-1/2, 1/2) around the class center.
    UniformShift,
    /// Unit-variance Gaussian features around the class center.
    GaussianShift,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub dim: usize,
    pub n: usize,
    /// p(Y = +1).
    pub p_pos: f64,
    /// Desired accuracy of the reference classifier, strictly in (0.5, 1).
    pub target_accuracy: f64,
    pub family: SynthFamily,
    pub seed: u64,
}

/// A loaded or generated dataset with homogeneous dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    labeled: bool,
    pub provenance: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, provenance: String) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput { context: "dataset" });
        }
        let dim = samples[0].dim();
        let labeled = samples[0].label().is_some();
        for (index, s) in samples.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                }
                .at_sample(index));
            }
            if s.label().is_some() != labeled {
                return Err(Error::InvalidParameter(format!(
                    "sample {index} breaks the labeled/unlabeled homogeneity of the dataset"
                )));
            }
        }
        Ok(Self {
            samples,
            dim,
            labeled,
            provenance,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labeled(&self) -> bool {
        self.labeled
    }

    /// Copy of this dataset with all labels removed.
    pub fn strip_labels(&self) -> Dataset {
        Dataset {
            samples: self.samples.iter().map(Sample::strip_label).collect(),
            dim: self.dim,
            labeled: false,
            provenance: format!("{} (labels stripped)", self.provenance),
        }
    }
}

/// Output of the synthetic generator: the sample, the reference
/// classifier, and the calibrated per-dimension shift.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub theta_ref: ClassifierParams,
    pub delta: f64,
}

/// Number of draws used to calibrate delta against the target accuracy.
const CALIBRATION_DRAWS: usize = 100_000;
const BISECTION_ITERS: usize = 40;
const DELTA_BRACKET: (f64, f64) = (0.0, 4.0);
/// Calibration contract: realized accuracy within this of the target.
const CALIBRATION_TOL: f64 = 0.005;

/// Generates labels from p(Y) and features with independent dimensions
/// shifted by +-delta/2 per class; delta is found by bisection so that
/// theta_ref = (1, ..., 1)/sqrt(d) classifies a dedicated calibration draw
/// of 10^5 points with the target accuracy.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SynthOutput> {
    if config.dim == 0 || config.n == 0 {
        return Err(Error::InvalidParameter(
            "synthetic data needs dim >= 1 and n >= 1".into(),
        ));
    }
    if !(config.p_pos > 0.0 && config.p_pos < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p(Y=1) must lie in (0, 1), got {}",
            config.p_pos
        )));
    }
    if !(config.target_accuracy > 0.5 && config.target_accuracy < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target accuracy must lie strictly in (0.5, 1), got {}",
            config.target_accuracy
        )));
    }

    let delta = calibrate_delta(config)?;

    // data stream is distinct from the calibration stream
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let d = config.dim;
    let scale = 1.0 / (d as f64).sqrt();
    let mut samples = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let y: i32 = if rng.random::<f64>() < config.p_pos {
            1
        } else {
            -1
        };
        let center = y as f64 * delta / 2.0;
        let mut features = Vec::with_capacity(d);
        for _ in 0..d {
            features.push(center + base_draw(&mut rng, config.family));
        }
        samples.push(Sample::labeled(features, y)?);
    }
    let dataset = Dataset::new(
        samples,
        format!(
            "synthetic family={:?} d={} n={} p_pos={} target_accuracy={} delta={} seed={}",
            config.family,
            config.dim,
            config.n,
            config.p_pos,
            config.target_accuracy,
            delta,
            config.seed
        ),
    )?;
    let theta_ref = ClassifierParams::new(vec![scale; d])?;
    Ok(SynthOutput {
        dataset,
        theta_ref,
        delta,
    })
}

fn base_draw(rng: &mut ChaCha8Rng, family: SynthFamily) -> f64 {
    match family {
        SynthFamily::UniformShift => rng.random::<f64>() - 0.5,
        SynthFamily::GaussianShift => rng.sample::<f64, _>(rand_distr::StandardNormal),
    }
}

/// Bisection for delta on a single calibration draw. The reference margin
/// of a point with label y decomposes as y * sqrt(d) * delta / 2 plus a
/// delta-independent noise term, so one draw of (label, noise) pairs
/// serves every bisection step and accuracy is monotone in delta
/// sample-by-sample.
fn calibrate_delta(config: &SynthConfig) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let d = config.dim;
    let scale = 1.0 / (d as f64).sqrt();
    let mut draws = Vec::with_capacity(CALIBRATION_DRAWS);
    for _ in 0..CALIBRATION_DRAWS {
        let y: i32 = if rng.random::<f64>() < config.p_pos {
            1
        } else {
            -1
        };
        let mut noise = 0.0;
        for _ in 0..d {
            noise += base_draw(&mut rng, config.family) * scale;
        }
        draws.push((y, noise));
    }
    let accuracy = |delta: f64| -> f64 {
        let correct = draws
            .iter()
            .filter(|&&(y, noise)| {
                let f = y as f64 * (d as f64).sqrt() * delta / 2.0 + noise;
                let predicted = if f >= 0.0 { 1 } else { -1 };
                predicted == y
            })
            .count();
        correct as f64 / draws.len() as f64
    };

    let (mut lo, mut hi) = DELTA_BRACKET;
    let target = config.target_accuracy;
    if accuracy(hi) < target - CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "target accuracy {target} is unattainable within the delta bracket \
             [{}, {}] (reached {})",
            DELTA_BRACKET.0,
            DELTA_BRACKET.1,
            accuracy(hi)
        )));
    }
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if accuracy(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let realized = accuracy(delta);
    if (realized - target).abs() > CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "bisection finished at accuracy {realized}, outside +-{CALIBRATION_TOL} of {target}"
        )));
    }
    Ok(delta)
}

/// Parses a label token: any nonzero integer, with an optional leading '+'.
fn parse_label(token: &str, line: usize) -> Result<i32> {
    let cleaned = token.strip_prefix('+').unwrap_or(token);
    let label: i32 = cleaned.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("unknown label value {token:?}"),
    })?;
    if label == 0 {
        return Err(Error::Parse {
            line,
            msg: "label 0 is not a valid class id".into(),
        });
    }
    Ok(label)
}

/// Loads a dense numeric CSV. When `has_labels` is set, `label_column`
/// names the zero-based column holding the class id. `expected_dim`, when
/// given, must equal the resulting feature dimension. Files carry no
/// header by default; `skip_header` drops the first line.
pub fn load_dense_csv(
    path: &Path,
    has_labels: bool,
    label_column: usize,
    expected_dim: Option<usize>,
    skip_header: bool,
) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dense_csv(
        &text,
        has_labels,
        label_column,
        expected_dim,
        skip_header,
        path,
    )
}

fn parse_dense_csv(
    text: &str,
    has_labels: bool,
    label_column: usize,
    expected_dim: Option<usize>,
    skip_header: bool,
    path: &Path,
) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if skip_header && idx == 0 {
            continue;
        }
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => {
                if has_labels && label_column >= cells.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!(
                            "label column {label_column} out of range for {} columns",
                            cells.len()
                        ),
                    });
                }
                width = Some(cells.len());
            }
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("ragged row: expected {w} columns, got {}", cells.len()),
                });
            }
            _ => {}
        }
        let mut label = None;
        let mut features = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            if has_labels && col == label_column {
                label = Some(parse_label(cell, line_no)?);
            } else {
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("non-numeric cell {cell:?} in column {col}"),
                })?;
                features.push(value);
            }
        }
        samples.push(Sample::new(features, label).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "dense csv",
        });
    }
    if let Some(expected) = expected_dim
        && samples[0].dim() != expected
    {
        return Err(Error::DimensionMismatch {
            expected,
            got: samples[0].dim(),
        });
    }
    Dataset::new(samples, format!("dense csv {}", path.display()))
}

/// Loads the sparse `label idx:val idx:val ...` format. Indices are
/// 1-based and strictly increasing within a line; `?` marks an unlabeled
/// line; absent indices densify to zero.
pub fn load_sparse(path: &Path, d_declared: usize) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_sparse(&text, d_declared, path)
}

fn parse_sparse(text: &str, d_declared: usize, path: &Path) -> Result<Dataset> {
    if d_declared == 0 {
        return Err(Error::InvalidParameter(
            "sparse loading needs a declared dimension >= 1".into(),
        ));
    }
    let mut samples = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_token = tokens.next().expect("non-empty line has a first token");
        let label = if label_token == "?" {
            None
        } else {
            Some(parse_label(label_token, line_no)?)
        };
        let mut features = vec![0.0f64; d_declared];
        let mut last_index = 0usize;
        for token in tokens {
            let (index_str, value_str) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected idx:val, got {token:?}"),
            })?;
            let index: usize = index_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index {index_str:?}"),
            })?;
            let value: f64 = value_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value {value_str:?}"),
            })?;
            if index == 0 || index <= last_index {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "indices must be 1-based and strictly increasing, got {index} after {last_index}"
                    ),
                });
            }
            if index > d_declared {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("index {index} exceeds declared dimension {d_declared}"),
                });
            }
            features[index - 1] = value;
            last_index = index;
        }
        samples.push(Sample::new(features, label).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "sparse file",
        });
    }
    Dataset::new(samples, format!("sparse {}", path.display()))
}

/// Per-feature statistics produced by [`standardize`]. The std recorded is
/// the one used in the transform, i.e. 1 for constant features.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizeStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Indices of zero-variance features (centered, std left at 1).
    pub constant_features: Vec<usize>,
}

/// Affine transform to zero mean and unit variance per feature, using the
/// population (1/n) variance. Zero-variance features are centered only.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, StandardizeStats)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let d = dataset.dim();
    let mut mean = vec![0.0f64; d];
    for s in dataset.samples() {
        for (m, &x) in mean.iter_mut().zip(s.features()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0f64; d];
    for s in dataset.samples() {
        for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(s.features()) {
            *v += (x - m) * (x - m);
        }
    }
    let mut std = Vec::with_capacity(d);
    let mut constant_features = Vec::new();
    for (j, v) in var.iter_mut().enumerate() {
        *v /= n as f64;
        if *v == 0.0 {
            constant_features.push(j);
            std.push(1.0);
        } else {
            std.push(v.sqrt());
        }
    }
    let samples: Vec<Sample> = dataset
        .samples()
        .iter()
        .map(|s| {
            let features = s
                .features()
                .iter()
                .enumerate()
                .map(|(j, &x)| (x - mean[j]) / std[j])
                .collect();
            Sample::new(features, s.label())
        })
        .collect::<Result<_>>()?;
    let standardized = Dataset::new(samples, format!("{} (standardized)", dataset.provenance))?;
    Ok((
        standardized,
        StandardizeStats {
            mean,
            std,
            constant_features,
        },
    ))
}

/// Writes a dataset as dense CSV, labels (when present) in the last
/// column. Floats use the shortest representation that round-trips, so a
/// written file re-loads to an identical dataset.
pub fn write_dense_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for s in dataset.samples() {
        let mut first = true;
        for &x in s.features() {
            if !first {
                out.push(',');
            }
            write!(out, "{x}").expect("string write");
            first = false;
        }
        if let Some(label) = s.label() {
            write!(out, ",{label}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
