//! Risk-module checks against independent oracles: quadrature for the
//! closed forms, Monte Carlo for the plug-in estimates.

mod common;

use common::{
    binary_marginals, gh_expectation, hinge_expectation_oracle, log_loss_expectation_oracle, mean,
    rng, sample_labeled_mixture, sample_std, std_normal,
};
use rand::Rng;
use unlabeled_risk::core::{ClassifierParams, LabelMarginals, Sample};
use unlabeled_risk::mixture::MixtureFit;
use unlabeled_risk::risk::{
    LossSpec, conditional_expected_loss, empirical_risk, loss_eval_multiclass, plugin_risk,
    plugin_risk_multiclass,
};

#[test]
fn exp_closed_form_matches_gh64() {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let y: i32 = if r.random::<f64>() < 0.5 { 1 } else { -1 };
        let mu: f64 = r.random_range(-5.0..5.0);
        let sigma: f64 = r.random_range(0.05..10.0);
        let closed = conditional_expected_loss(LossSpec::Exp, y, mu, sigma).unwrap();
        let oracle = gh_expectation(|a| (-(y as f64) * a).exp(), mu, sigma, 64);
        worst = worst.max(((closed - oracle) / oracle).abs());
    }
    assert!(
        worst <= 1e-8,
        "worst exp closed-vs-GH64 rel error {worst:.3e}"
    );
}

#[test]
fn hinge_closed_form_matches_kink_split_quadrature() {
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let y: i32 = if r.random::<f64>() < 0.5 { 1 } else { -1 };
        let mu: f64 = r.random_range(-5.0..5.0);
        let sigma: f64 = r.random_range(0.05..10.0);
        let closed = conditional_expected_loss(LossSpec::Hinge, y, mu, sigma).unwrap();
        let oracle = hinge_expectation_oracle(y, mu, sigma);
        if oracle > 1e-12 {
            worst = worst.max(((closed - oracle) / oracle).abs());
        } else {
            assert!(closed <= 1e-12, "closed {closed} vs vanishing oracle");
        }
    }
    assert!(
        worst <= 1e-8,
        "worst hinge closed-vs-quadrature rel error {worst:.3e}"
    );
}

#[test]
fn log_loss_quadrature_matches_independent_simpson() {
    let mut r = rng(103);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let y: i32 = if r.random::<f64>() < 0.5 { 1 } else { -1 };
        let mu: f64 = r.random_range(-5.0..5.0);
        let sigma: f64 = r.random_range(0.05..10.0);
        let got = conditional_expected_loss(LossSpec::Log, y, mu, sigma).unwrap();
        let oracle = log_loss_expectation_oracle(y, mu, sigma);
        worst = worst.max(((got - oracle) / oracle.abs().max(1e-300)).abs());
    }
    assert!(
        worst <= 1e-8,
        "worst log quadrature-vs-oracle rel error {worst:.3e}"
    );
}

#[test]
fn log_loss_quadrature_matches_monte_carlo_sample() {
    // reduced version of the acceptance check: a few parameter draws, each
    // against a 10^6-draw Monte Carlo mean within 4 standard errors
    let mut r = rng(104);
    for _ in 0..10 {
        let y: i32 = if r.random::<f64>() < 0.5 { 1 } else { -1 };
        let mu: f64 = r.random_range(-3.0..3.0);
        let sigma: f64 = r.random_range(0.1..5.0);
        let quad = conditional_expected_loss(LossSpec::Log, y, mu, sigma).unwrap();
        let n = 1_000_000usize;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let a = mu + sigma * std_normal(&mut r);
                let x = -(y as f64) * a;
                x.max(0.0) + (-x.abs()).exp().ln_1p()
            })
            .collect();
        let mc = mean(&draws);
        let se = sample_std(&draws) / (n as f64).sqrt();
        assert!(
            (quad - mc).abs() <= 4.0 * se,
            "quad {quad} vs mc {mc} (se {se}) at y={y} mu={mu} sigma={sigma}"
        );
    }
}

#[test]
fn empirical_exp_risk_matches_conditional_closed_form() {
    // margins ~ N(1, 1) for label +1 only: the sample mean of the exp loss
    // must sit within 3 standard errors of exp(-1 + 1/2)
    let mut r = rng(105);
    let n = 100_000usize;
    let samples: Vec<Sample> = (0..n)
        .map(|_| Sample::labeled(vec![1.0 + std_normal(&mut r)], 1).unwrap())
        .collect();
    let theta = ClassifierParams::new(vec![1.0]).unwrap();
    let report = empirical_risk(&samples, &theta, LossSpec::Exp).unwrap();
    let losses: Vec<f64> = samples
        .iter()
        .map(|s| (-(s.label().unwrap() as f64) * s.features()[0]).exp())
        .collect();
    let se = sample_std(&losses) / (n as f64).sqrt();
    let closed = (-0.5f64).exp();
    assert!(
        (report.estimate - closed).abs() <= 3.0 * se,
        "empirical {} vs closed {closed} (se {se})",
        report.estimate
    );
}

#[test]
fn plugin_log_risk_matches_labeled_monte_carlo() {
    let marginals = binary_marginals(0.7);
    let params = [(1, 2.0, 1.0), (-1, -2.0, 1.0)];
    let fit = MixtureFit::from_params(marginals.clone(), &params).unwrap();
    let plugin = plugin_risk(&fit, LossSpec::Log).unwrap();

    let mut r = rng(106);
    let (values, labels) = sample_labeled_mixture(1_000_000, &marginals, &params, &mut r);
    let mc = mean(
        &values
            .values()
            .iter()
            .zip(&labels)
            .map(|(&alpha, &y)| {
                let x = -(y as f64) * alpha;
                x.max(0.0) + (-x.abs()).exp().ln_1p()
            })
            .collect::<Vec<f64>>(),
    );
    assert!(
        (plugin.estimate - mc).abs() < 1e-3,
        "plugin {} vs monte carlo {mc}",
        plugin.estimate
    );
}

#[test]
fn multiclass_plugin_matches_labeled_monte_carlo() {
    let marginals = LabelMarginals::new(vec![(1, 0.5), (2, 0.3), (3, 0.2)]).unwrap();
    // margin distribution of classifier k given class y
    let comp = |k: usize, y: i32| -> (f64, f64) {
        let mean = if y as usize == k {
            2.0
        } else {
            -1.5 - 0.3 * k as f64
        };
        (mean, 0.8 + 0.1 * y as f64)
    };
    let fits: Vec<MixtureFit> = (1..=3)
        .map(|k| {
            let params: Vec<(i32, f64, f64)> = (1..=3)
                .map(|y| {
                    let (m, s) = comp(k, y);
                    (y, m, s)
                })
                .collect();
            MixtureFit::from_params(marginals.clone(), &params).unwrap()
        })
        .collect();

    let mut r = rng(107);
    // the literal multiclass log loss takes values around 4.6 on this
    // configuration, so 1e6 draws leave ~1e-3 of Monte Carlo noise; more
    // draws tighten the oracle below the asserted tolerance
    let n = 8_000_000usize;
    for loss in [LossSpec::MulticlassLog, LossSpec::MulticlassHinge] {
        let plugin = plugin_risk_multiclass(&fits, loss).unwrap();
        let mut total = 0.0;
        for _ in 0..n {
            let u: f64 = r.random();
            let y = if u < 0.5 {
                1
            } else if u < 0.8 {
                2
            } else {
                3
            };
            let margins: Vec<f64> = (1..=3)
                .map(|k| {
                    let (m, s) = comp(k, y);
                    m + s * std_normal(&mut r)
                })
                .collect();
            total += loss_eval_multiclass(loss, y, &margins).unwrap();
        }
        let mc = total / n as f64;
        assert!(
            (plugin.estimate - mc).abs() < 1e-3,
            "{loss:?}: plugin {} vs monte carlo {mc}",
            plugin.estimate
        );
    }
}

#[test]
fn multiclass_hinge_at_k2_unrolls_to_weighted_conditionals() {
    let marginals = LabelMarginals::new(vec![(1, 0.6), (2, 0.4)]).unwrap();
    let params_per_classifier = [
        [(1, 1.2, 0.7), (2, -0.8, 1.1)],
        [(1, -1.0, 0.9), (2, 1.5, 0.6)],
    ];
    let fits: Vec<MixtureFit> = params_per_classifier
        .iter()
        .map(|p| MixtureFit::from_params(marginals.clone(), p).unwrap())
        .collect();
    let got = plugin_risk_multiclass(&fits, LossSpec::MulticlassHinge)
        .unwrap()
        .estimate;

    // by definition at K = 2: sum_y p(y) E[(1 + f_{k != y})_+ | y], written
    // out with the normal-moment formula c Phi(c/s) + s phi(c/s), c = 1 + m
    let e_hinge_plus = |m: f64, s: f64| -> f64 {
        let c = 1.0 + m;
        let t = c / s;
        let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cap_phi = 0.5 * libm::erfc(-t / std::f64::consts::SQRT_2);
        c * cap_phi + s * phi
    };
    // y = 1: competitor is classifier 2 whose margin | y=1 is (-1.0, 0.9)
    // y = 2: competitor is classifier 1 whose margin | y=2 is (-0.8, 1.1)
    let expect = 0.6 * e_hinge_plus(-1.0, 0.9) + 0.4 * e_hinge_plus(-0.8, 1.1);
    assert!(
        (got - expect).abs() < 1e-12,
        "multiclass hinge {got} vs unrolled {expect}"
    );
}

#[test]
fn plugin_estimate_converges_to_the_true_risk() {
    // data sampled at known parameters: the plug-in estimate approaches
    // the true risk (computed at the generating parameters), with the
    // median relative error at n=1e4 below the one at n=1e2 over 20 seeds
    let marginals = binary_marginals(0.7);
    let params = [(1, 2.0, 1.0), (-1, -2.0, 1.0)];
    let truth_fit = MixtureFit::from_params(marginals.clone(), &params).unwrap();
    let true_risk = plugin_risk(&truth_fit, LossSpec::Log).unwrap().estimate;

    let mut rel_small = Vec::new();
    let mut rel_large = Vec::new();
    for seed in 0..20u64 {
        let mut r = rng(900 + seed);
        for (n, out) in [(100usize, &mut rel_small), (10_000, &mut rel_large)] {
            let (values, _) = sample_labeled_mixture(n, &marginals, &params, &mut r);
            let fit = unlabeled_risk::mixture::fit_fixed_weight_mixture(
                &values,
                &marginals,
                &unlabeled_risk::mixture::FitConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let estimate = plugin_risk(&fit, LossSpec::Log).unwrap().estimate;
            out.push((estimate - true_risk).abs() / true_risk);
        }
    }
    let med_small = common::median(&rel_small);
    let med_large = common::median(&rel_large);
    assert!(
        med_large < med_small,
        "median rel error at n=1e4 ({med_large}) not below n=1e2 ({med_small})"
    );
}

#[test]
fn positive_class_contribution_strictly_decreases_in_mu() {
    for loss in [LossSpec::Exp, LossSpec::Log, LossSpec::Hinge] {
        let mut prev = f64::INFINITY;
        for i in 0..30 {
            let mu = -2.0 + 0.2 * i as f64;
            let v = conditional_expected_loss(loss, 1, mu, 0.8).unwrap();
            assert!(v < prev, "{loss:?} not strictly decreasing at mu={mu}");
            prev = v;
        }
    }
}
