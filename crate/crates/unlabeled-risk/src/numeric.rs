//! Internal numeric building blocks: normal density/CDF, overflow-safe
//! logistic terms, Gauss-Hermite rules and a refining composite Simpson
//! integrator.

use std::sync::OnceLock;

use nalgebra::DMatrix;

pub(crate) const LN_2PI: f64 = 1.837877066409345483560659472811;
pub(crate) const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub(crate) const SQRT_PI: f64 = 1.772453850905516027298167483341;

/// log N(z; mu, sigma^2); sigma must be positive.
pub(crate) fn normal_logpdf(z: f64, mu: f64, sigma: f64) -> f64 {
    let t = (z - mu) / sigma;
    -0.5 * t * t - sigma.ln() - 0.5 * LN_2PI
}

pub(crate) fn normal_pdf(z: f64, mu: f64, sigma: f64) -> f64 {
    normal_logpdf(z, mu, sigma).exp()
}

/// Standard normal density.
pub(crate) fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (SQRT_2 * SQRT_PI)
}

/// Standard normal CDF via erfc, accurate in both tails.
pub(crate) fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

pub(crate) fn normal_cdf(z: f64, mu: f64, sigma: f64) -> f64 {
    std_normal_cdf((z - mu) / sigma)
}

/// log(1 + e^x) without overflow: max(x, 0) + log1p(e^{-|x|}).
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// log(sum_i e^{x_i}) for a short slice.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Gauss-Hermite rule: integrates e^{-t^2} f(t) over the real line as
/// sum_i w_i f(t_i).
pub(crate) struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch construction: nodes are the eigenvalues of the
    /// symmetric tridiagonal companion matrix with off-diagonal
    /// sqrt(k/2), weights are sqrt(pi) times the squared first components
    /// of the eigenvectors.
    fn build(n: usize) -> Self {
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for k in 0..n - 1 {
            let off = ((k + 1) as f64 * 0.5).sqrt();
            companion[(k, k + 1)] = off;
            companion[(k + 1, k)] = off;
        }
        let eigen = companion.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = eigen
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &node)| {
                let first = eigen.eigenvectors[(0, i)];
                (node, first * first * SQRT_PI)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

pub(crate) fn gauss_hermite_64() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::build(64))
}

pub(crate) fn gauss_hermite_128() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::build(128))
}

/// Result of a refining composite Simpson pass.
pub(crate) struct SimpsonOutcome {
    pub value: f64,
    /// Relative change between the last two refinement levels.
    pub rel_change: f64,
}

/// Composite Simpson on [a, b], doubling the interval count until the
/// relative change between successive levels drops below `rel_tol` or
/// `max_doublings` is exhausted. The caller decides whether the achieved
/// `rel_change` is acceptable.
pub(crate) fn simpson_refine<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_doublings: u32,
) -> SimpsonOutcome {
    let mut n = 64usize;
    let mut prev = composite_simpson(&f, a, b, n);
    let mut rel_change = f64::INFINITY;
    for _ in 0..max_doublings {
        n *= 2;
        let next = composite_simpson(&f, a, b, n);
        let scale = next.abs().max(prev.abs()).max(f64::MIN_POSITIVE);
        rel_change = (next - prev).abs() / scale;
        prev = next;
        if rel_change <= rel_tol {
            break;
        }
    }
    SimpsonOutcome {
        value: prev,
        rel_change,
    }
}

fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    sum += 4.0 * odd + 2.0 * even;
    sum * h / 3.0
}
