//! Shared helpers for the integration-test suites: independent quadrature
//! oracles (built differently from the library's internals), mixture
//! samplers and small statistics utilities.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unlabeled_risk::core::{LabelMarginals, MarginValues};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

// ---------------------------------------------------------------------
// independent Gauss-Hermite rule (Newton iteration on the Hermite
// recurrence, not the library's Golub-Welsch eigendecomposition)
// ---------------------------------------------------------------------

pub fn gh_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..200 {
            // orthonormal Hermite recurrence
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            derivative = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (derivative * derivative);
        weights[n - 1 - i] = weights[i];
    }
    // descending from the positive end; callers only sum over them
    (nodes, weights)
}

/// E[f(A)] with A ~ N(mu, sigma^2) using an n-node GH rule.
pub fn gh_expectation(f: impl Fn(f64) -> f64, mu: f64, sigma: f64, n: usize) -> f64 {
    let (nodes, weights) = gh_rule(n);
    let sqrt2 = std::f64::consts::SQRT_2;
    nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| w * f(mu + sqrt2 * sigma * t))
        .sum::<f64>()
        / std::f64::consts::PI.sqrt()
}

// ---------------------------------------------------------------------
// independent fixed-grid Simpson with doubling
// ---------------------------------------------------------------------

pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2) && b >= a);
    if a == b {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        total += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    total * h / 3.0
}

pub fn simpson_to_tol(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut n = 128usize;
    let mut prev = simpson(f, a, b, n);
    for _ in 0..14 {
        n *= 2;
        let next = simpson(f, a, b, n);
        let scale = next.abs().max(prev.abs()).max(1e-300);
        let change = (next - prev).abs() / scale;
        prev = next;
        if change <= rel_tol {
            break;
        }
    }
    prev
}

pub fn normal_pdf(z: f64, mu: f64, sigma: f64) -> f64 {
    let t = (z - mu) / sigma;
    (-0.5 * t * t).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Quadrature oracle for E[(1 - y A)_+], A ~ N(mu, sigma^2): the integral
/// is restricted to the region where the hinge is active, where the
/// integrand is smooth, so the Simpson refinement converges fast.
pub fn hinge_expectation_oracle(y: i32, mu: f64, sigma: f64) -> f64 {
    let yf = y as f64;
    // active region: y = +1 -> alpha < 1; y = -1 -> alpha > -1
    let (lo, hi) = if y == 1 {
        (mu - 13.0 * sigma, (mu + 13.0 * sigma).min(1.0))
    } else {
        ((mu - 13.0 * sigma).max(-1.0), mu + 13.0 * sigma)
    };
    if hi <= lo {
        return 0.0;
    }
    simpson_to_tol(
        |alpha| (1.0 - yf * alpha) * normal_pdf(alpha, mu, sigma),
        lo,
        hi,
        1e-12,
    )
}

/// Quadrature oracle for E[log(1 + e^{-y A})], A ~ N(mu, sigma^2).
pub fn log_loss_expectation_oracle(y: i32, mu: f64, sigma: f64) -> f64 {
    let yf = y as f64;
    let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
    simpson_to_tol(
        |alpha| softplus(-yf * alpha) * normal_pdf(alpha, mu, sigma),
        mu - 13.0 * sigma,
        mu + 13.0 * sigma,
        1e-12,
    )
}

// ---------------------------------------------------------------------
// mixture sampling
// ---------------------------------------------------------------------

/// Draws n values from sum_y p(y) N(mu_y, sigma_y^2), returning values and
/// labels. `params` is (class, mean, std) with priors from `marginals`.
pub fn sample_labeled_mixture(
    n: usize,
    marginals: &LabelMarginals,
    params: &[(i32, f64, f64)],
    rng: &mut ChaCha8Rng,
) -> (MarginValues, Vec<i32>) {
    let entries: Vec<(i32, f64)> = marginals.entries().to_vec();
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut class = entries[entries.len() - 1].0;
        for &(c, p) in &entries {
            acc += p;
            if u < acc {
                class = c;
                break;
            }
        }
        let &(_, mean, std) = params
            .iter()
            .find(|(c, _, _)| *c == class)
            .expect("class has parameters");
        values.push(mean + std * std_normal(rng));
        labels.push(class);
    }
    (MarginValues::new(values).unwrap(), labels)
}

pub fn binary_marginals(p_pos: f64) -> LabelMarginals {
    LabelMarginals::binary(p_pos).unwrap()
}

// ---------------------------------------------------------------------
// small statistics
// ---------------------------------------------------------------------

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() as f64 - 1.0) * q).round() as usize;
    v[idx]
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Score of the fixed-weight binary mixture loglikelihood at z, in the
/// parameter order (mu_+1, mu_-1, sigma^2_+1, sigma^2_-1). Written from
/// the derivative definitions, independently of the library's entry
/// assembly.
pub fn mixture_score(z: f64, p: (f64, f64), mu: (f64, f64), sigma: (f64, f64)) -> [f64; 4] {
    let n_pos = normal_pdf(z, mu.0, sigma.0);
    let n_neg = normal_pdf(z, mu.1, sigma.1);
    let mix = p.0 * n_pos + p.1 * n_neg;
    let z_pos = (z - mu.0) / sigma.0;
    let z_neg = (z - mu.1) / sigma.1;
    [
        p.0 / sigma.0 * z_pos * n_pos / mix,
        p.1 / sigma.1 * z_neg * n_neg / mix,
        p.0 / (2.0 * sigma.0 * sigma.0) * (z_pos * z_pos - 1.0) * n_pos / mix,
        p.1 / (2.0 * sigma.1 * sigma.1) * (z_neg * z_neg - 1.0) * n_neg / mix,
    ]
}
