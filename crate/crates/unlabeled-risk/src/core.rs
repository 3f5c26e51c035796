//! Fundamental data types shared by the whole crate: classifier weights,
//! samples, class priors and margin vectors.

use crate::error::{Error, Result};

/// Weight vector of a linear classifier. The score of a sample `x` is the
/// dot product `sum_j w_j x_j`; there is no intercept term (append a
/// constant feature during ingestion if one is needed).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    weights: Vec<f64>,
}

impl ClassifierParams {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "classifier needs at least one weight".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite {
                context: "classifier weights",
            });
        }
        Ok(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces one coordinate, keeping the rest. Used by the coordinate
    /// trainers; validates finiteness of the new value.
    pub fn with_coordinate(&self, index: usize, value: f64) -> Result<Self> {
        if index >= self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: index,
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "classifier weights",
            });
        }
        let mut weights = self.weights.clone();
        weights[index] = value;
        Ok(Self { weights })
    }
}

/// One observation: a feature vector and an optional class label.
/// Binary problems use labels in `{-1, +1}`, multiclass problems use
/// `{1, ..., K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    features: Vec<f64>,
    label: Option<i32>,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Option<i32>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidParameter(
                "sample needs at least one feature".into(),
            ));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "sample features",
            });
        }
        if label == Some(0) {
            return Err(Error::InvalidLabel {
                label: 0,
                context: "class ids are -1/+1 (binary) or 1..K (multiclass)",
            });
        }
        Ok(Self { features, label })
    }

    pub fn labeled(features: Vec<f64>, label: i32) -> Result<Self> {
        Self::new(features, Some(label))
    }

    pub fn unlabeled(features: Vec<f64>) -> Result<Self> {
        Self::new(features, None)
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> Option<i32> {
        self.label
    }

    /// Drops the label, keeping the features.
    pub fn strip_label(&self) -> Sample {
        Sample {
            features: self.features.clone(),
            label: None,
        }
    }
}

/// Known class prior distribution p(Y).
///
/// Construction checks positivity and normalization. Pairwise distinctness
/// of the priors is *not* checked here: evaluating a likelihood under
/// uniform priors is legitimate, while fitting under them is not, so the
/// fitting routines call [`LabelMarginals::require_identifiable`] instead.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMarginals {
    /// (class id, prior), sorted by class id.
    entries: Vec<(i32, f64)>,
}

/// Tolerance on `sum(priors) == 1`.
const PRIOR_SUM_TOL: f64 = 1e-12;
/// Two priors closer than this are treated as equal for identifiability.
const PRIOR_DISTINCT_TOL: f64 = 1e-9;

impl LabelMarginals {
    pub fn new(mut entries: Vec<(i32, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput {
                context: "label marginals",
            });
        }
        entries.sort_by_key(|(class, _)| *class);
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "duplicate class id {} in label marginals",
                    window[0].0
                )));
            }
        }
        for &(class, p) in &entries {
            if class == 0 {
                return Err(Error::InvalidLabel {
                    label: 0,
                    context: "class ids are -1/+1 (binary) or 1..K (multiclass)",
                });
            }
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "prior for class {class} must be strictly positive, got {p}"
                )));
            }
        }
        let sum: f64 = entries.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "priors must sum to 1 within {PRIOR_SUM_TOL:e}, got {sum}"
            )));
        }
        Ok(Self { entries })
    }

    /// Binary marginals with `p(Y = +1) = p_pos`.
    pub fn binary(p_pos: f64) -> Result<Self> {
        if !p_pos.is_finite() || p_pos <= 0.0 || p_pos >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "p(Y=1) must lie strictly inside (0, 1), got {p_pos}"
            )));
        }
        Self::new(vec![(-1, 1.0 - p_pos), (1, p_pos)])
    }

    pub fn classes(&self) -> impl Iterator<Item = i32> + '_ {
        self.entries.iter().map(|(class, _)| *class)
    }

    pub fn entries(&self) -> &[(i32, f64)] {
        &self.entries
    }

    pub fn num_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn prior(&self, class: i32) -> Option<f64> {
        self.entries
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, p)| *p)
    }

    pub fn is_binary(&self) -> bool {
        self.entries.len() == 2 && self.prior(1).is_some() && self.prior(-1).is_some()
    }

    /// Errors unless all priors are pairwise distinct. Uniform (or any
    /// partially equal) priors make the fixed-weight mixture unidentifiable.
    pub fn require_identifiable(&self) -> Result<()> {
        for i in 0..self.entries.len() {
            for j in (i + 1)..self.entries.len() {
                let (ci, pi) = self.entries[i];
                let (cj, pj) = self.entries[j];
                if (pi - pj).abs() <= PRIOR_DISTINCT_TOL {
                    return Err(Error::Identifiability(format!(
                        "p(Y={ci}) = {pi} and p(Y={cj}) = {pj} are equal"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Margin values `f_theta(X^(i))` for a batch of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginValues {
    values: Vec<f64>,
}

impl MarginValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "margin values",
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dot product `sum_j theta_j x_j` of the classifier weights with one sample.
pub fn margin(params: &ClassifierParams, sample: &Sample) -> Result<f64> {
    if params.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: sample.dim(),
        });
    }
    let value: f64 = params
        .weights
        .iter()
        .zip(sample.features.iter())
        .map(|(w, x)| w * x)
        .sum();
    if !value.is_finite() {
        return Err(Error::NonFinite { context: "margin" });
    }
    Ok(value)
}

/// Margins of a whole batch, order preserved. A failure on sample `i`
/// aborts and reports `i`.
pub fn margins_batch(params: &ClassifierParams, samples: &[Sample]) -> Result<MarginValues> {
    let mut values = Vec::with_capacity(samples.len());
    for (index, sample) in samples.iter().enumerate() {
        let value = margin(params, sample).map_err(|e| e.at_sample(index))?;
        values.push(value);
    }
    MarginValues::new(values)
}
