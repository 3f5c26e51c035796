//! Maximum-likelihood estimation of a one-dimensional Gaussian mixture
//! whose mixing weights are held fixed at the known class priors. Only the
//! component means and variances are free, which keeps every EM step in
//! closed form and (with non-uniform priors) makes the parameters
//! identifiable, so no component/class relabeling step exists anywhere:
//! the component carrying weight p(Y=k) *is* class k.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{LabelMarginals, MarginValues};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, normal_cdf, normal_logpdf};

/// Knobs of the EM fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop when the relative loglikelihood improvement drops below this.
    pub loglik_rel_tolerance: f64,
    /// Number of EM runs from perturbed initializations; the best final
    /// loglikelihood wins.
    pub restarts: usize,
    /// Component variances are floored at this factor times the overall
    /// sample variance, preventing collapse onto a single point.
    pub variance_floor_factor: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            loglik_rel_tolerance: 1e-9,
            restarts: 5,
            variance_floor_factor: 1e-8,
            seed: 0,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.loglik_rel_tolerance <= 0.0 || self.loglik_rel_tolerance.is_nan() {
            return Err(Error::InvalidParameter(
                "loglik_rel_tolerance must be positive".into(),
            ));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter(
                "restarts must be at least 1".into(),
            ));
        }
        if self.variance_floor_factor <= 0.0 || self.variance_floor_factor.is_nan() {
            return Err(Error::InvalidParameter(
                "variance_floor_factor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Estimated Gaussian for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub class: i32,
    pub mean: f64,
    pub std: f64,
}

/// Result of a fixed-weight mixture fit, plus fit metadata.
#[derive(Debug, Clone)]
pub struct MixtureFit {
    /// One per class, in the marginals' (class-id sorted) order.
    components: Vec<MixtureComponent>,
    marginals: LabelMarginals,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Number of samples the fit was computed from (0 for synthetic fits).
    pub n: usize,
    /// Loglikelihood after each EM iteration of the winning run.
    pub loglik_trace: Vec<f64>,
}

impl MixtureFit {
    /// Builds a fit directly from parameters, e.g. for evaluating the
    /// plug-in risk at known means and standard deviations. `params` maps
    /// class id to (mean, std); every class in `marginals` must appear.
    pub fn from_params(marginals: LabelMarginals, params: &[(i32, f64, f64)]) -> Result<Self> {
        let mut components = Vec::with_capacity(marginals.num_classes());
        for (class, _) in marginals.entries() {
            let &(_, mean, std) = params.iter().find(|(c, _, _)| c == class).ok_or_else(|| {
                Error::InvalidParameter(format!("no parameters given for class {class}"))
            })?;
            if !mean.is_finite() || !std.is_finite() {
                return Err(Error::NonFinite {
                    context: "mixture parameters",
                });
            }
            if std < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "std for class {class} must be non-negative, got {std}"
                )));
            }
            components.push(MixtureComponent {
                class: *class,
                mean,
                std,
            });
        }
        Ok(Self {
            components,
            marginals,
            loglik: f64::NAN,
            iterations: 0,
            converged: false,
            n: 0,
            loglik_trace: Vec::new(),
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn marginals(&self) -> &LabelMarginals {
        &self.marginals
    }

    pub fn component(&self, class: i32) -> Option<&MixtureComponent> {
        self.components.iter().find(|c| c.class == class)
    }

    pub fn mean(&self, class: i32) -> Option<f64> {
        self.component(class).map(|c| c.mean)
    }

    pub fn std(&self, class: i32) -> Option<f64> {
        self.component(class).map(|c| c.std)
    }

    pub fn is_binary(&self) -> bool {
        self.marginals.is_binary()
    }

    /// Mixture density sum_y p(y) N(z; mu_y, sigma_y^2). Requires all
    /// component stds to be positive.
    pub fn pdf(&self, z: f64) -> f64 {
        self.log_pdf(z).exp()
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let p = self.marginals.prior(c.class).expect("component class");
                p.ln() + normal_logpdf(z, c.mean, c.std)
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Mixture CDF sum_y p(y) Phi((z - mu_y) / sigma_y).
    pub fn cdf(&self, z: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let p = self.marginals.prior(c.class).expect("component class");
                p * normal_cdf(z, c.mean, c.std)
            })
            .sum()
    }

    fn require_positive_stds(&self) -> Result<()> {
        for c in &self.components {
            if c.std <= 0.0 || c.std.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "std for class {} must be positive, got {}",
                    c.class, c.std
                )));
            }
            if !c.mean.is_finite() || !c.std.is_finite() {
                return Err(Error::NonFinite {
                    context: "mixture parameters",
                });
            }
        }
        Ok(())
    }
}

/// Loglikelihood of `values` under the mixture with the given weights and
/// the fit's component parameters: sum_i log sum_y p(y) N(v_i; mu_y, sigma_y^2).
pub fn loglikelihood(
    values: &MarginValues,
    marginals: &LabelMarginals,
    fit: &MixtureFit,
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput {
            context: "loglikelihood values",
        });
    }
    fit.require_positive_stds()?;
    let params: Vec<(f64, f64, f64)> = marginals
        .entries()
        .iter()
        .map(|&(class, p)| {
            let c = fit.component(class).ok_or_else(|| {
                Error::InvalidParameter(format!("fit has no component for class {class}"))
            })?;
            Ok((p.ln(), c.mean, c.std))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut terms = vec![0.0; params.len()];
    for &z in values.values() {
        for (t, &(logp, mean, std)) in terms.iter_mut().zip(params.iter()) {
            *t = logp + normal_logpdf(z, mean, std);
        }
        total += log_sum_exp(&terms);
    }
    Ok(total)
}

/// EM for the fixed-weight mixture. Mixing weights stay at the priors;
/// means and variances are re-estimated each iteration. Runs
/// `config.restarts` initializations and returns the best final
/// loglikelihood.
pub fn fit_fixed_weight_mixture(
    values: &MarginValues,
    marginals: &LabelMarginals,
    config: &FitConfig,
) -> Result<MixtureFit> {
    config.validate()?;
    marginals.require_identifiable()?;
    let k = marginals.num_classes();
    let n = values.len();
    if n < 2 * k {
        return Err(Error::TooFewSamples {
            need: 2 * k,
            got: n,
        });
    }
    let floor = variance_floor(values, config)?;

    let base = quantile_init(values, marginals, floor);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pooled_std = population_variance(values.values()).sqrt();

    let mut best: Option<RunResult> = None;
    for restart in 0..config.restarts {
        let mut init = base.clone();
        if restart > 0 {
            for mean in &mut init.means {
                *mean += 0.5 * pooled_std * sample_std_normal(&mut rng);
            }
        }
        let run = em_run(values, marginals, &init, floor, config);
        let better = match &best {
            None => true,
            Some(b) => run.loglik > b.loglik,
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("restarts >= 1");
    let components = marginals
        .entries()
        .iter()
        .enumerate()
        .map(|(idx, &(class, _))| MixtureComponent {
            class,
            mean: run.means[idx],
            std: run.stds[idx],
        })
        .collect();
    Ok(MixtureFit {
        components,
        marginals: marginals.clone(),
        loglik: run.loglik,
        iterations: run.iterations,
        converged: run.converged,
        n,
        loglik_trace: run.trace,
    })
}

/// One fit per classifier: classifier k's margins are modeled as a
/// K-component fixed-weight mixture, yielding estimates of the margin
/// distribution given every class. With K = 2 this is exactly
/// [`fit_fixed_weight_mixture`] applied to each margin vector.
pub fn fit_multiclass_mixtures(
    all_margins: &[MarginValues],
    marginals: &LabelMarginals,
    config: &FitConfig,
) -> Result<Vec<MixtureFit>> {
    marginals.require_identifiable()?;
    let k = marginals.num_classes();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "multiclass fit needs at least 2 classes".into(),
        ));
    }
    if all_margins.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: all_margins.len(),
        });
    }
    all_margins
        .iter()
        .map(|values| fit_fixed_weight_mixture(values, marginals, config))
        .collect()
}

/// Single EM run initialized at an existing fit's parameters. Used by the
/// trainers to warm-start the refit after a small perturbation of theta.
pub(crate) fn fit_warm_start(
    values: &MarginValues,
    marginals: &LabelMarginals,
    start: &MixtureFit,
    config: &FitConfig,
) -> Result<MixtureFit> {
    config.validate()?;
    marginals.require_identifiable()?;
    let k = marginals.num_classes();
    let n = values.len();
    if n < 2 * k {
        return Err(Error::TooFewSamples {
            need: 2 * k,
            got: n,
        });
    }
    let floor = variance_floor(values, config)?;
    let init = Init {
        means: marginals
            .entries()
            .iter()
            .map(|&(class, _)| {
                start.mean(class).ok_or_else(|| {
                    Error::InvalidParameter(format!("warm start missing class {class}"))
                })
            })
            .collect::<Result<_>>()?,
        stds: marginals
            .entries()
            .iter()
            .map(|&(class, _)| {
                let s = start.std(class).ok_or_else(|| {
                    Error::InvalidParameter(format!("warm start missing class {class}"))
                })?;
                Ok(s.max(floor.sqrt()))
            })
            .collect::<Result<_>>()?,
    };
    let run = em_run(values, marginals, &init, floor, config);
    let components = marginals
        .entries()
        .iter()
        .enumerate()
        .map(|(idx, &(class, _))| MixtureComponent {
            class,
            mean: run.means[idx],
            std: run.stds[idx],
        })
        .collect();
    Ok(MixtureFit {
        components,
        marginals: marginals.clone(),
        loglik: run.loglik,
        iterations: run.iterations,
        converged: run.converged,
        n,
        loglik_trace: run.trace,
    })
}

#[derive(Clone)]
struct Init {
    means: Vec<f64>,
    stds: Vec<f64>,
}

struct RunResult {
    means: Vec<f64>,
    stds: Vec<f64>,
    loglik: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn variance_floor(values: &MarginValues, config: &FitConfig) -> Result<f64> {
    let var = population_variance(values.values());
    if var == 0.0 {
        return Err(Error::DegenerateData(
            "all margin values are identical; the mixture fit is undefined".into(),
        ));
    }
    Ok(config.variance_floor_factor * var)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Sorts the values and splits them into consecutive blocks whose masses
/// match the priors in class-id order; each block's mean/std initializes
/// its class. For binary priors the lower block initializes class -1.
fn quantile_init(values: &MarginValues, marginals: &LabelMarginals, floor: f64) -> Init {
    let mut sorted: Vec<f64> = values.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = marginals.num_classes();
    let mut means = Vec::with_capacity(k);
    let mut stds = Vec::with_capacity(k);
    let mut cumulative = 0.0;
    let mut start = 0usize;
    for (idx, &(_, p)) in marginals.entries().iter().enumerate() {
        cumulative += p;
        let end = if idx == k - 1 {
            n
        } else {
            // keep at least one point per block
            ((cumulative * n as f64).round() as usize)
                .max(start + 1)
                .min(n - (k - 1 - idx))
        };
        let block = &sorted[start..end];
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        let var = population_variance(block).max(floor);
        means.push(mean);
        stds.push(var.sqrt());
        start = end;
    }
    Init { means, stds }
}

fn sample_std_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

fn em_run(
    values: &MarginValues,
    marginals: &LabelMarginals,
    init: &Init,
    floor: f64,
    config: &FitConfig,
) -> RunResult {
    let zs = values.values();
    let n = zs.len();
    let k = marginals.num_classes();
    let log_priors: Vec<f64> = marginals.entries().iter().map(|(_, p)| p.ln()).collect();

    let mut means = init.means.clone();
    let mut stds = init.stds.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut resp = vec![0.0f64; n * k];
    let mut prev_loglik = f64::NEG_INFINITY;
    let mut terms = vec![0.0f64; k];
    loop {
        // E-step: responsibilities under fixed weights, and the
        // loglikelihood at the current parameters.
        let mut loglik = 0.0;
        for (i, &z) in zs.iter().enumerate() {
            for y in 0..k {
                terms[y] = log_priors[y] + normal_logpdf(z, means[y], stds[y]);
            }
            let lse = log_sum_exp(&terms);
            loglik += lse;
            for y in 0..k {
                resp[i * k + y] = (terms[y] - lse).exp();
            }
        }
        trace.push(loglik);

        let scale = prev_loglik.abs().max(f64::MIN_POSITIVE);
        if (loglik - prev_loglik).abs() / scale < config.loglik_rel_tolerance {
            converged = true;
            break;
        }
        // the returned parameters are always the ones the last trace
        // entry was evaluated at, so the cap check sits before the M-step
        if iterations == config.max_iterations {
            break;
        }
        prev_loglik = loglik;

        // M-step: weighted means, then weighted variances with the floor.
        iterations += 1;
        for y in 0..k {
            let mut mass = 0.0;
            let mut sum = 0.0;
            for (i, &z) in zs.iter().enumerate() {
                let r = resp[i * k + y];
                mass += r;
                sum += r * z;
            }
            if mass <= f64::MIN_POSITIVE {
                // starved component: leave its parameters untouched
                continue;
            }
            let mean = sum / mass;
            let mut ss = 0.0;
            for (i, &z) in zs.iter().enumerate() {
                ss += resp[i * k + y] * (z - mean).powi(2);
            }
            means[y] = mean;
            stds[y] = (ss / mass).max(floor).sqrt();
        }
    }

    RunResult {
        means,
        stds,
        loglik: *trace.last().expect("at least one EM iteration"),
        iterations,
        converged,
        trace,
    }
}
