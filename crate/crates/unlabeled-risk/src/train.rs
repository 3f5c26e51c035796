//! Training without labels: minimize the plug-in risk estimate over theta
//! by finite-difference gradient descent or per-coordinate grid search,
//! with a supervised gradient-descent baseline for comparison.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::core::{ClassifierParams, LabelMarginals, Sample, margin, margins_batch};
use crate::error::{Error, Result};
use crate::mixture::{FitConfig, MixtureFit, fit_fixed_weight_mixture, fit_warm_start};
use crate::risk::{LossSpec, RiskReport, empirical_risk, plugin_risk};

/// Whether a perturbed-theta risk evaluation refits the mixture.
///
/// The perturbed margins change the class-conditional distributions, so
/// the mixture parameters are functions of theta and a refit is required
/// for a well-defined finite difference. `FrozenFit` keeps the current
/// iteration's estimates for every perturbed evaluation, which makes the
/// plug-in risk independent of the perturbation (the finite differences
/// vanish and training stalls immediately); it exists for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefitMode {
    #[default]
    WarmStart,
    Cold,
    FrozenFit,
}

#[derive(Debug, Clone)]
pub struct GradDescentConfig {
    pub step_size: f64,
    /// Finite-difference step: h_i = max(fd_step_abs, fd_step_rel * |theta_i|).
    pub fd_step_abs: f64,
    pub fd_step_rel: f64,
    pub max_iterations: usize,
    /// Stop when the relative risk improvement drops below this.
    pub tolerance: f64,
    pub seed: u64,
    pub refit: RefitMode,
    pub fit: FitConfig,
}

impl Default for GradDescentConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            fd_step_abs: 1e-4,
            fd_step_rel: 1e-4,
            max_iterations: 100,
            tolerance: 1e-5,
            seed: 0,
            refit: RefitMode::WarmStart,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchConfig {
    /// Number of grid points per coordinate; odd, so the current value is
    /// always on the grid.
    pub grid_points: usize,
    /// Half-width of the search window around the current coordinate.
    pub window: f64,
    /// Window multiplier applied after a sweep that changed nothing.
    pub shrink: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Couples the window to the grid size as width 4 * grid_points
    /// instead of using `window`. Off by default.
    pub coupled_window: bool,
    pub fit: FitConfig,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 17,
            window: 2.0,
            shrink: 0.5,
            max_sweeps: 40,
            seed: 0,
            coupled_window: false,
            fit: FitConfig::default(),
        }
    }
}

/// Window below which the grid search stops shrinking.
const GRID_MIN_WINDOW: f64 = 1e-3;
/// Consecutive non-improving iterations before the gradient trainer halts.
const STALL_LIMIT: usize = 10;
/// Attempts at perturbing a degenerate starting point.
const DEGENERATE_RETRIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStatus {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub risk_unsup: f64,
    pub risk_sup: Option<f64>,
    pub error_rate: Option<f64>,
}

/// Per-iteration history of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    /// CSV with header `iter,risk_unsup,risk_sup,error_rate`; empty fields
    /// where no held-out labels were supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,risk_unsup,risk_sup,error_rate\n");
        for r in &self.records {
            write!(out, "{},{}", r.iteration, r.risk_unsup).expect("string write");
            match r.risk_sup {
                Some(v) => write!(out, ",{v}").expect("string write"),
                None => out.push(','),
            }
            match r.error_rate {
                Some(v) => write!(out, ",{v}").expect("string write"),
                None => out.push(','),
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub theta: ClassifierParams,
    pub trace: TrainTrace,
    pub status: TrainStatus,
    /// (iteration, coordinate) pairs whose perturbed evaluation failed and
    /// was skipped.
    pub skipped_evals: Vec<(usize, usize)>,
}

/// The evaluation primitive both trainers minimize: margins of theta,
/// fixed-weight mixture fit, plug-in risk.
pub fn unsupervised_risk_at(
    theta: &ClassifierParams,
    samples: &[Sample],
    marginals: &LabelMarginals,
    loss: LossSpec,
    fit_config: &FitConfig,
) -> Result<(RiskReport, MixtureFit)> {
    let margins = margins_batch(theta, samples)?;
    let fit = fit_fixed_weight_mixture(&margins, marginals, fit_config)?;
    let report = plugin_risk(&fit, loss)?;
    Ok((report, fit))
}

struct Evaluator<'a> {
    samples: &'a [Sample],
    marginals: &'a LabelMarginals,
    loss: LossSpec,
    fit: FitConfig,
}

impl Evaluator<'_> {
    fn eval(&self, theta: &ClassifierParams) -> Result<(f64, MixtureFit)> {
        let (report, fit) =
            unsupervised_risk_at(theta, self.samples, self.marginals, self.loss, &self.fit)?;
        Ok((report.estimate, fit))
    }

    fn eval_warm(&self, theta: &ClassifierParams, start: &MixtureFit) -> Result<(f64, MixtureFit)> {
        let margins = margins_batch(theta, self.samples)?;
        let fit = fit_warm_start(&margins, self.marginals, start, &self.fit)?;
        let report = plugin_risk(&fit, self.loss)?;
        Ok((report.estimate, fit))
    }

    fn eval_cold(&self, theta: &ClassifierParams, seed: u64) -> Result<(f64, MixtureFit)> {
        let margins = margins_batch(theta, self.samples)?;
        let config = FitConfig {
            seed,
            ..self.fit.clone()
        };
        let fit = fit_fixed_weight_mixture(&margins, self.marginals, &config)?;
        let report = plugin_risk(&fit, self.loss)?;
        Ok((report.estimate, fit))
    }

    /// Retries a degenerate starting point with growing seeded noise.
    fn eval_start(
        &self,
        theta: ClassifierParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ClassifierParams, f64, MixtureFit)> {
        let mut current = theta;
        for attempt in 0..=DEGENERATE_RETRIES {
            match self.eval(&current) {
                Ok((risk, fit)) => return Ok((current, risk, fit)),
                Err(Error::DegenerateData(_)) if attempt < DEGENERATE_RETRIES => {
                    let scale = 0.1 * (attempt + 1) as f64;
                    let weights = current
                        .weights()
                        .iter()
                        .map(|&w| w + scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    current = ClassifierParams::new(weights)?;
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

fn eval_metrics(
    theta: &ClassifierParams,
    loss: LossSpec,
    eval_set: Option<&[Sample]>,
) -> Result<(Option<f64>, Option<f64>)> {
    match eval_set {
        None => Ok((None, None)),
        Some(samples) => {
            let sup = empirical_risk(samples, theta, loss)?.estimate;
            let err = error_rate(theta, samples)?;
            Ok((Some(sup), Some(err)))
        }
    }
}

fn uniform_init(dim: usize, rng: &mut ChaCha8Rng) -> Result<ClassifierParams> {
    let weights = (0..dim)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect::<Vec<f64>>();
    ClassifierParams::new(weights)
}

/// Gradient descent on the plug-in risk with central finite differences;
/// every perturbed evaluation recomputes margins and (except under
/// `FrozenFit`) refits the mixture. Each iteration therefore costs 2d
/// full risk evaluations, which is the practical dimension limit of this
/// trainer.
pub fn train_gradient_descent(
    samples: &[Sample],
    marginals: &LabelMarginals,
    loss: LossSpec,
    config: &GradDescentConfig,
    theta0: Option<ClassifierParams>,
    eval_set: Option<&[Sample]>,
) -> Result<TrainResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "training samples",
        });
    }
    let bad_step = |v: f64| v.is_nan() || v < 0.0;
    if bad_step(config.step_size)
        || bad_step(config.fd_step_rel)
        || config.fd_step_abs <= 0.0
        || config.fd_step_abs.is_nan()
    {
        return Err(Error::InvalidParameter(
            "step sizes must be non-negative and fd_step_abs positive".into(),
        ));
    }
    let dim = samples[0].dim();
    let evaluator = Evaluator {
        samples,
        marginals,
        loss,
        fit: config.fit.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let theta0 = match theta0 {
        Some(t) => t,
        None => uniform_init(dim, &mut rng)?,
    };
    let (mut theta, mut risk, mut fit) = evaluator.eval_start(theta0, &mut rng)?;

    let mut trace = TrainTrace::default();
    let (sup, err) = eval_metrics(&theta, loss, eval_set)?;
    trace.records.push(TraceRecord {
        iteration: 0,
        risk_unsup: risk,
        risk_sup: sup,
        error_rate: err,
    });

    let mut skipped_evals = Vec::new();
    let mut stall_count = 0usize;
    let mut status = TrainStatus::MaxIterations;

    for iteration in 1..=config.max_iterations {
        let evals: Vec<std::result::Result<f64, ()>> = (0..dim)
            .into_par_iter()
            .map(|i| {
                let h = config
                    .fd_step_abs
                    .max(config.fd_step_rel * theta.weights()[i].abs());
                let side = |sign: f64| -> Result<f64> {
                    let shifted = theta.with_coordinate(i, theta.weights()[i] + sign * h)?;
                    let (r, _) = match config.refit {
                        RefitMode::WarmStart => evaluator.eval_warm(&shifted, &fit)?,
                        RefitMode::Cold => {
                            let seed = cold_seed(config.seed, iteration, i, sign > 0.0);
                            evaluator.eval_cold(&shifted, seed)?
                        }
                        RefitMode::FrozenFit => (plugin_risk(&fit, loss)?.estimate, fit.clone()),
                    };
                    Ok(r)
                };
                match (side(1.0), side(-1.0)) {
                    (Ok(plus), Ok(minus)) => Ok((plus - minus) / (2.0 * h)),
                    _ => Err(()),
                }
            })
            .collect();

        let mut gradient = vec![0.0f64; dim];
        for (i, e) in evals.into_iter().enumerate() {
            match e {
                Ok(g) => gradient[i] = g,
                Err(()) => skipped_evals.push((iteration, i)),
            }
        }

        let new_weights: Vec<f64> = theta
            .weights()
            .iter()
            .zip(&gradient)
            .map(|(&w, &g)| w - config.step_size * g)
            .collect();
        if new_weights == theta.weights() {
            status = TrainStatus::Stalled;
            break;
        }
        let candidate = ClassifierParams::new(new_weights)?;
        let (new_theta, new_risk, new_fit) = evaluator.eval_start(candidate, &mut rng)?;

        let (sup, err) = eval_metrics(&new_theta, loss, eval_set)?;
        trace.records.push(TraceRecord {
            iteration,
            risk_unsup: new_risk,
            risk_sup: sup,
            error_rate: err,
        });

        let improvement = (risk - new_risk) / risk.abs().max(f64::MIN_POSITIVE);
        theta = new_theta;
        fit = new_fit;
        let worsened = new_risk >= risk;
        risk = new_risk;
        if worsened {
            stall_count += 1;
            if stall_count >= STALL_LIMIT {
                status = TrainStatus::Stalled;
                break;
            }
        } else {
            stall_count = 0;
            if improvement < config.tolerance {
                status = TrainStatus::Converged;
                break;
            }
        }
    }

    Ok(TrainResult {
        theta,
        trace,
        status,
        skipped_evals,
    })
}

fn cold_seed(seed: u64, iteration: usize, coordinate: usize, positive: bool) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [iteration as u64, coordinate as u64, positive as u64] {
        h ^= v
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
    }
    h
}

/// Coordinate descent over a shrinking per-coordinate grid. Coordinates
/// start at Uniform(-2, 2); each coordinate is set to the grid value
/// minimizing the plug-in risk (ties broken toward the current value,
/// then the smaller value). A sweep with no change shrinks the window;
/// the search stops when the window drops below 1e-3.
pub fn train_grid_search(
    samples: &[Sample],
    marginals: &LabelMarginals,
    loss: LossSpec,
    config: &GridSearchConfig,
    eval_set: Option<&[Sample]>,
) -> Result<TrainResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "training samples",
        });
    }
    if config.grid_points < 3 || config.grid_points.is_multiple_of(2) {
        return Err(Error::InvalidParameter(
            "grid_points must be an odd number >= 3".into(),
        ));
    }
    if config.window <= 0.0
        || config.window.is_nan()
        || config.shrink <= 0.0
        || config.shrink >= 1.0
        || config.shrink.is_nan()
    {
        return Err(Error::InvalidParameter(
            "window must be positive and shrink inside (0, 1)".into(),
        ));
    }
    let dim = samples[0].dim();
    let evaluator = Evaluator {
        samples,
        marginals,
        loss,
        fit: config.fit.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let theta0 = uniform_init(dim, &mut rng)?;
    let (mut theta, mut risk, mut fit) = evaluator.eval_start(theta0, &mut rng)?;

    let mut trace = TrainTrace::default();
    let (sup, err) = eval_metrics(&theta, loss, eval_set)?;
    trace.records.push(TraceRecord {
        iteration: 0,
        risk_unsup: risk,
        risk_sup: sup,
        error_rate: err,
    });

    let mut window = if config.coupled_window {
        4.0 * config.grid_points as f64
    } else {
        config.window
    };
    let g = config.grid_points;
    let mut skipped_evals = Vec::new();
    let mut status = TrainStatus::MaxIterations;

    let mut sweep = 0usize;
    while sweep < config.max_sweeps {
        if window < GRID_MIN_WINDOW {
            status = TrainStatus::Converged;
            break;
        }
        sweep += 1;
        let mut changed = false;
        for i in 0..dim {
            let current = theta.weights()[i];
            let offsets: Vec<f64> = (0..g)
                .map(|k| window * (2.0 * k as f64 / (g - 1) as f64 - 1.0))
                .collect();
            let evals: Vec<Option<(f64, f64, MixtureFit)>> = offsets
                .par_iter()
                .map(|&off| {
                    let value = current + off;
                    if off == 0.0 {
                        // current value: already evaluated
                        return Some((risk, value, fit.clone()));
                    }
                    let shifted = theta.with_coordinate(i, value).ok()?;
                    evaluator
                        .eval_warm(&shifted, &fit)
                        .ok()
                        .map(|(r, f)| (r, value, f))
                })
                .collect();
            let mut best: Option<(f64, f64, MixtureFit)> = None;
            for (idx, e) in evals.into_iter().enumerate() {
                match e {
                    Some(candidate) => {
                        let better = match &best {
                            None => true,
                            Some(b) => {
                                candidate.0 < b.0
                                    || (candidate.0 == b.0
                                        && ((candidate.1 - current).abs() < (b.1 - current).abs()
                                            || ((candidate.1 - current).abs()
                                                == (b.1 - current).abs()
                                                && candidate.1 < b.1)))
                            }
                        };
                        if better {
                            best = Some(candidate);
                        }
                    }
                    None => skipped_evals.push((sweep, i * g + idx)),
                }
            }
            if let Some((best_risk, best_value, best_fit)) = best
                && best_value != current
            {
                theta = theta.with_coordinate(i, best_value)?;
                risk = best_risk;
                fit = best_fit;
                changed = true;
            }
        }
        let (sup, err) = eval_metrics(&theta, loss, eval_set)?;
        trace.records.push(TraceRecord {
            iteration: sweep,
            risk_unsup: risk,
            risk_sup: sup,
            error_rate: err,
        });
        if !changed {
            window *= config.shrink;
        }
    }
    if status == TrainStatus::MaxIterations && window < GRID_MIN_WINDOW {
        status = TrainStatus::Converged;
    }

    Ok(TrainResult {
        theta,
        trace,
        status,
        skipped_evals,
    })
}

/// Plain gradient descent on the labeled empirical risk with analytic
/// gradients; the supervised comparison point for the unsupervised
/// trainers.
#[derive(Debug, Clone)]
pub struct SupervisedConfig {
    pub step_size: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            max_iterations: 10_000,
            tolerance: 1e-10,
        }
    }
}

pub fn train_supervised_baseline(
    samples: &[Sample],
    loss: LossSpec,
    config: &SupervisedConfig,
) -> Result<ClassifierParams> {
    if !loss.is_binary() {
        return Err(Error::UnsupportedLoss {
            kind: loss.name(),
            context: "the supervised baseline trains binary classifiers",
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "training samples",
        });
    }
    let dim = samples[0].dim();
    let mut theta = ClassifierParams::new(vec![0.0; dim])?;
    let mut risk = empirical_risk(samples, &theta, loss)?.estimate;
    let mut best = (theta.clone(), risk);
    let mut step = config.step_size;
    let mut rising = 0usize;
    let mut failures = 0usize;

    for _ in 0..config.max_iterations {
        let gradient = empirical_risk_gradient(samples, &theta, loss)?;
        let weights: Vec<f64> = theta
            .weights()
            .iter()
            .zip(&gradient)
            .map(|(&w, &g)| w - step * g)
            .collect();
        let candidate = ClassifierParams::new(weights)?;
        let new_risk = empirical_risk(samples, &candidate, loss)?.estimate;
        if new_risk > risk {
            rising += 1;
            if rising >= 10 {
                failures += 1;
                if failures >= 5 {
                    return Err(Error::Divergence(format!(
                        "risk kept increasing after {failures} step halvings"
                    )));
                }
                step *= 0.5;
                rising = 0;
                theta = best.0.clone();
                risk = best.1;
                continue;
            }
        } else {
            rising = 0;
        }
        let improvement = (risk - new_risk) / risk.abs().max(f64::MIN_POSITIVE);
        theta = candidate;
        risk = new_risk;
        if risk < best.1 {
            best = (theta.clone(), risk);
        }
        if improvement >= 0.0 && improvement < config.tolerance {
            break;
        }
    }
    Ok(best.0)
}

/// Analytic gradient of the mean binary loss; the hinge uses its
/// subgradient with the convention that the boundary y alpha = 1
/// contributes zero.
pub fn empirical_risk_gradient(
    samples: &[Sample],
    theta: &ClassifierParams,
    loss: LossSpec,
) -> Result<Vec<f64>> {
    let dim = theta.dim();
    let mut gradient = vec![0.0f64; dim];
    for (index, sample) in samples.iter().enumerate() {
        let y = sample.label().ok_or(Error::InvalidLabel {
            label: 0,
            context: "supervised gradient needs labels",
        })? as f64;
        let alpha = margin(theta, sample).map_err(|e| e.at_sample(index))?;
        let m = y * alpha;
        let coeff = match loss {
            LossSpec::Exp => -y * (-m).exp(),
            LossSpec::Log => {
                // -y * sigma(-m), computed stably on both sides
                let s = if m > 0.0 {
                    let e = (-m).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + m.exp())
                };
                -y * s
            }
            LossSpec::Hinge => {
                if m < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            _ => unreachable!("binary loss checked by caller"),
        };
        for (g, &x) in gradient.iter_mut().zip(sample.features()) {
            *g += coeff * x;
        }
    }
    let n = samples.len() as f64;
    for g in &mut gradient {
        *g /= n;
    }
    Ok(gradient)
}

/// Fraction of labeled samples with sign(f_theta(X)) != Y; sign(0)
/// counts as +1.
pub fn error_rate(theta: &ClassifierParams, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "error rate samples",
        });
    }
    let mut wrong = 0usize;
    for (index, sample) in samples.iter().enumerate() {
        let y = sample.label().ok_or(Error::InvalidLabel {
            label: 0,
            context: "error rate needs labels",
        })?;
        if y != 1 && y != -1 {
            return Err(Error::InvalidLabel {
                label: y,
                context: "error rate is defined for binary labels",
            });
        }
        let f = margin(theta, sample).map_err(|e| e.at_sample(index))?;
        let predicted = if f >= 0.0 { 1 } else { -1 };
        if predicted != y {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / samples.len() as f64)
}
