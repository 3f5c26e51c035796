//! Asymptotic accuracy of the estimators: the 4x4 Fisher information of
//! the fixed-weight binary mixture assembled from standardized cross-moment
//! integrals, and the delta-method variance of the plug-in risk.

use nalgebra::Matrix4;
use rayon::prelude::*;

use crate::core::LabelMarginals;
use crate::error::{Error, Result};
use crate::mixture::MixtureFit;
use crate::numeric::{log_sum_exp, normal_logpdf, simpson_refine};
use crate::risk::{LossSpec, plugin_risk};

/// Ordering of the mixture parameters in every 4-vector/4x4 matrix here:
/// (mu_{+1}, mu_{-1}, sigma^2_{+1}, sigma^2_{-1}).
const PARAM_CLASSES: [i32; 4] = [1, -1, 1, -1];

const SYMMETRY_REL_TOL: f64 = 1e-9;
const PSD_REL_TOL: f64 = 1e-8;
const MAX_CONDITION: f64 = 1e12;
/// Quadrature refinement target and the acceptance threshold beyond which
/// a moment integral is reported as non-convergent.
const MOMENT_REL_TOL: f64 = 1e-10;
const MOMENT_FAIL_TOL: f64 = 1e-6;
/// Moment integrals smaller than this are exact zeros for every entry
/// formula; their relative refinement error is meaningless.
const MOMENT_ABS_FLOOR: f64 = 1e-12;

/// Fisher information of (mu_{+1}, mu_{-1}, sigma^2_{+1}, sigma^2_{-1})
/// at a binary mixture point.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    pub entries: [[f64; 4]; 4],
    pub marginals: LabelMarginals,
    pub eta: MixtureFit,
}

impl FisherMatrix {
    pub fn as_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|r, c| self.entries[r][c])
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let eig = self.as_matrix().symmetric_eigen();
        let mut vals = [
            eig.eigenvalues[0],
            eig.eigenvalues[1],
            eig.eigenvalues[2],
            eig.eigenvalues[3],
        ];
        vals.sort_by(f64::total_cmp);
        vals
    }
}

/// Parameter covariance and delta-method risk variance.
#[derive(Debug, Clone)]
pub struct AsymptoticVariance {
    /// Inverse Fisher information.
    pub parameter_cov: [[f64; 4]; 4],
    /// Asymptotic variance of sqrt(n) (Rhat_n - R).
    pub risk_variance: f64,
    /// Gradient of the plug-in risk with respect to the four parameters.
    pub gradient: [f64; 4],
}

impl AsymptoticVariance {
    /// Standard deviation of the risk estimate at sample size n:
    /// sqrt(risk_variance / n).
    pub fn std_for_n(&self, n: usize) -> f64 {
        (self.risk_variance / n as f64).sqrt()
    }
}

struct BinaryEta {
    p: [f64; 2], // priors of (+1, -1)
    mu: [f64; 2],
    sigma: [f64; 2],
}

fn binary_eta(eta: &MixtureFit) -> Result<BinaryEta> {
    if !eta.is_binary() {
        return Err(Error::InvalidParameter(
            "Fisher information is implemented for the binary mixture".into(),
        ));
    }
    let get = |class: i32| -> Result<(f64, f64, f64)> {
        let c = eta
            .component(class)
            .ok_or_else(|| Error::InvalidParameter(format!("fit misses class {class}")))?;
        if c.std <= 0.0 || c.std.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "sigma for class {class} must be positive, got {}",
                c.std
            )));
        }
        let p = eta.marginals().prior(class).expect("binary fit");
        Ok((p, c.mean, c.std))
    };
    let (p_pos, mu_pos, s_pos) = get(1)?;
    let (p_neg, mu_neg, s_neg) = get(-1)?;
    Ok(BinaryEta {
        p: [p_pos, p_neg],
        mu: [mu_pos, mu_neg],
        sigma: [s_pos, s_neg],
    })
}

fn class_index(class: i32) -> Result<usize> {
    match class {
        1 => Ok(0),
        -1 => Ok(1),
        other => Err(Error::InvalidLabel {
            label: other,
            context: "moment integrals are defined for classes {-1, +1}",
        }),
    }
}

/// The standardized cross-moment integral
/// M_{m,n}(i, j) = int ((z-mu_i)/sigma_i)^m ((z-mu_j)/sigma_j)^n
///                 p_i(z) p_j(z) / p(z) dz
/// where p_i, p_j are component densities and p is the weighted mixture
/// density. Integrated by a refining Simpson rule on
/// [min mu - 12 max sigma, max mu + 12 max sigma].
pub fn moment_integral(
    m: u32,
    n: u32,
    class_i: i32,
    class_j: i32,
    eta: &MixtureFit,
) -> Result<f64> {
    let b = binary_eta(eta)?;
    let i = class_index(class_i)?;
    let j = class_index(class_j)?;
    let (lo, hi) = integration_range(&b);
    let ln_p = [b.p[0].ln(), b.p[1].ln()];
    let integrand = |z: f64| {
        let log_ni = normal_logpdf(z, b.mu[i], b.sigma[i]);
        let log_nj = normal_logpdf(z, b.mu[j], b.sigma[j]);
        let log_mix = log_sum_exp(&[
            ln_p[0] + normal_logpdf(z, b.mu[0], b.sigma[0]),
            ln_p[1] + normal_logpdf(z, b.mu[1], b.sigma[1]),
        ]);
        let zi = (z - b.mu[i]) / b.sigma[i];
        let zj = (z - b.mu[j]) / b.sigma[j];
        zi.powi(m as i32) * zj.powi(n as i32) * (log_ni + log_nj - log_mix).exp()
    };
    let out = simpson_refine(integrand, lo, hi, MOMENT_REL_TOL, 16);
    if out.rel_change > MOMENT_FAIL_TOL && out.value.abs() > MOMENT_ABS_FLOOR {
        return Err(Error::QuadratureNonConvergent {
            rel_change: out.rel_change,
        });
    }
    if !out.value.is_finite() {
        return Err(Error::NonFinite {
            context: "moment integral",
        });
    }
    Ok(out.value)
}

fn integration_range(b: &BinaryEta) -> (f64, f64) {
    let mu_min = b.mu[0].min(b.mu[1]);
    let mu_max = b.mu[0].max(b.mu[1]);
    let s_max = b.sigma[0].max(b.sigma[1]);
    (mu_min - 12.0 * s_max, mu_max + 12.0 * s_max)
}

/// Assembles the 4x4 information matrix from moment integrals, using the
/// score functions of the fixed-weight mixture:
///   d log p / d mu_i      = (p_i / sigma_i)   z_i       N_i / p
///   d log p / d sigma^2_i = (p_i / 2 sigma_i^2) (z_i^2 - 1) N_i / p
/// with z_i the standardized argument. Every entry is computed
/// independently; an asymmetric result is an internal-consistency error,
/// as is a matrix that fails the positive-semidefiniteness check.
pub fn fisher_information(eta: &MixtureFit) -> Result<FisherMatrix> {
    let b = binary_eta(eta)?;
    let mut entries = [[0.0f64; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let a_class = PARAM_CLASSES[r];
            let b_class = PARAM_CLASSES[c];
            let ai = class_index(a_class)?;
            let bi = class_index(b_class)?;
            let pa = b.p[ai];
            let pb = b.p[bi];
            let sa = b.sigma[ai];
            let sb = b.sigma[bi];
            entries[r][c] = match (r < 2, c < 2) {
                (true, true) => pa * pb / (sa * sb) * moment_integral(1, 1, a_class, b_class, eta)?,
                (true, false) => {
                    pa * pb / (2.0 * sa * sb * sb)
                        * (moment_integral(1, 2, a_class, b_class, eta)?
                            - moment_integral(1, 0, a_class, b_class, eta)?)
                }
                (false, true) => {
                    pa * pb / (2.0 * sa * sa * sb)
                        * (moment_integral(2, 1, a_class, b_class, eta)?
                            - moment_integral(0, 1, a_class, b_class, eta)?)
                }
                (false, false) => {
                    pa * pb / (4.0 * sa * sa * sb * sb)
                        * (moment_integral(2, 2, a_class, b_class, eta)?
                            - moment_integral(2, 0, a_class, b_class, eta)?
                            - moment_integral(0, 2, a_class, b_class, eta)?
                            + moment_integral(0, 0, a_class, b_class, eta)?)
                }
            };
        }
    }

    let scale = entries
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    #[allow(clippy::needless_range_loop)] // r/c pair both halves of the matrix
    for r in 0..4 {
        for c in (r + 1)..4 {
            let gap = (entries[r][c] - entries[c][r]).abs();
            if gap > SYMMETRY_REL_TOL * scale {
                return Err(Error::Inconsistency(format!(
                    "information matrix asymmetric at ({r},{c}): {} vs {}",
                    entries[r][c], entries[c][r]
                )));
            }
            let avg = 0.5 * (entries[r][c] + entries[c][r]);
            entries[r][c] = avg;
            entries[c][r] = avg;
        }
    }

    let fisher = FisherMatrix {
        entries,
        marginals: eta.marginals().clone(),
        eta: eta.clone(),
    };
    let eig = fisher.eigenvalues();
    let max_eig = eig[3].abs().max(f64::MIN_POSITIVE);
    if eig[0] < -PSD_REL_TOL * max_eig {
        return Err(Error::Inconsistency(format!(
            "information matrix is not positive semidefinite: min eigenvalue {}",
            eig[0]
        )));
    }
    Ok(fisher)
}

/// Delta-method variance of the plug-in risk: gradient of the risk with
/// respect to (mu, sigma^2) by central differences, propagated through the
/// inverse information matrix.
pub fn delta_method_risk_variance(eta: &MixtureFit, loss: LossSpec) -> Result<AsymptoticVariance> {
    let fisher = fisher_information(eta)?;
    let eig = fisher.as_matrix().symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min_abs = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v.abs()));
    let cond = if min_abs == 0.0 {
        f64::INFINITY
    } else {
        max_abs / min_abs
    };
    if !cond.is_finite() || cond >= MAX_CONDITION {
        return Err(Error::SingularInformation { cond });
    }

    // I^{-1} = V diag(1/lambda) V^T
    let mut inv = Matrix4::<f64>::zeros();
    for k in 0..4 {
        let v = eig.eigenvectors.column(k);
        let lambda = eig.eigenvalues[k];
        inv += v * v.transpose() / lambda;
    }

    let b = binary_eta(eta)?;
    let coords = [
        b.mu[0],
        b.mu[1],
        b.sigma[0] * b.sigma[0],
        b.sigma[1] * b.sigma[1],
    ];
    let mut gradient = [0.0f64; 4];
    for (c, g) in gradient.iter_mut().enumerate() {
        let step = if c < 2 {
            1e-5 * coords[c].abs().max(1.0)
        } else {
            1e-5 * coords[c]
        };
        let mut plus = coords;
        let mut minus = coords;
        plus[c] += step;
        minus[c] -= step;
        *g = (risk_at(&fisher.marginals, &plus, loss)? - risk_at(&fisher.marginals, &minus, loss)?)
            / (2.0 * step);
    }

    let gvec = nalgebra::Vector4::from_column_slice(&gradient);
    let risk_variance = (gvec.transpose() * inv * gvec)[(0, 0)];
    if risk_variance < -1e-12 {
        return Err(Error::Inconsistency(format!(
            "delta-method variance is negative: {risk_variance}"
        )));
    }
    let mut parameter_cov = [[0.0f64; 4]; 4];
    for (r, row) in parameter_cov.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = inv[(r, c)];
        }
    }
    Ok(AsymptoticVariance {
        parameter_cov,
        risk_variance: risk_variance.max(0.0),
        gradient,
    })
}

/// Plug-in risk as a function of the parameter vector
/// (mu_{+1}, mu_{-1}, sigma^2_{+1}, sigma^2_{-1}).
fn risk_at(marginals: &LabelMarginals, coords: &[f64; 4], loss: LossSpec) -> Result<f64> {
    if coords[2] <= 0.0 || coords[3] <= 0.0 {
        return Err(Error::InvalidParameter(
            "variance coordinate must stay positive".into(),
        ));
    }
    let fit = MixtureFit::from_params(
        marginals.clone(),
        &[
            (1, coords[0], coords[2].sqrt()),
            (-1, coords[1], coords[3].sqrt()),
        ],
    )?;
    Ok(plugin_risk(&fit, loss)?.estimate)
}

/// Which mixture parameter the accuracy surface sweeps.
#[derive(Debug, Clone)]
pub enum SurfaceAxis {
    /// p(Y = 1) varies; means and sigmas stay at the base values.
    Imbalance { p_values: Vec<f64> },
    /// |mu_1 - mu_{-1}| varies with the means centered on zero.
    MeanSeparation { separations: Vec<f64> },
    /// sigma_{+1} = ratio * sigma_{-1}.
    SigmaRatio { ratios: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SurfaceConfig {
    pub axis: SurfaceAxis,
    pub base_p_pos: f64,
    pub base_mu: (f64, f64),
    pub base_sigma: (f64, f64),
    pub loss: LossSpec,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            axis: SurfaceAxis::Imbalance {
                p_values: (0..9).map(|i| 0.55 + 0.05 * i as f64).collect(),
            },
            base_p_pos: 0.7,
            base_mu: (1.0, -1.0),
            base_sigma: (1.0, 1.0),
            loss: LossSpec::Log,
        }
    }
}

/// One row of the accuracy surface. `accuracy` is the inverse of the
/// delta-method asymptotic variance; a grid point where the variance is
/// unavailable (singular information, invalid prior) is kept with
/// `accuracy = None` rather than failing the whole sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub x: f64,
    pub accuracy: Option<f64>,
}

pub fn accuracy_surface(config: &SurfaceConfig) -> Result<Vec<SurfacePoint>> {
    let xs: &[f64] = match &config.axis {
        SurfaceAxis::Imbalance { p_values } => p_values,
        SurfaceAxis::MeanSeparation { separations } => separations,
        SurfaceAxis::SigmaRatio { ratios } => ratios,
    };
    if xs.is_empty() {
        return Err(Error::EmptyInput {
            context: "accuracy surface grid",
        });
    }
    let points: Vec<SurfacePoint> = xs
        .par_iter()
        .map(|&x| SurfacePoint {
            x,
            accuracy: surface_point(config, x).ok(),
        })
        .collect();
    Ok(points)
}

fn surface_point(config: &SurfaceConfig, x: f64) -> Result<f64> {
    let (p_pos, mu, sigma) = match &config.axis {
        SurfaceAxis::Imbalance { .. } => (x, config.base_mu, config.base_sigma),
        SurfaceAxis::MeanSeparation { .. } => {
            (config.base_p_pos, (x / 2.0, -x / 2.0), config.base_sigma)
        }
        SurfaceAxis::SigmaRatio { .. } => (
            config.base_p_pos,
            config.base_mu,
            (x * config.base_sigma.1, config.base_sigma.1),
        ),
    };
    let marginals = LabelMarginals::binary(p_pos)?;
    marginals.require_identifiable()?;
    let fit = MixtureFit::from_params(marginals, &[(1, mu.0, sigma.0), (-1, mu.1, sigma.1)])?;
    let av = delta_method_risk_variance(&fit, config.loss)?;
    if av.risk_variance <= 0.0 {
        return Err(Error::Inconsistency(
            "zero asymptotic variance on the surface grid".into(),
        ));
    }
    Ok(1.0 / av.risk_variance)
}

/// CSV rendering of a surface: header `x,accuracy`, one row per grid
/// point, empty accuracy cell for failed points. Floats use the shortest
/// representation that round-trips.
pub fn surface_to_csv(points: &[SurfacePoint]) -> String {
    let mut out = String::from("x,accuracy\n");
    for p in points {
        match p.accuracy {
            Some(a) => out.push_str(&format!("{},{}\n", p.x, a)),
            None => out.push_str(&format!("{},\n", p.x)),
        }
    }
    out
}
