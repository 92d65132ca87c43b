//! Independent recomputation of the derived constants the library relies on.
//! Nothing here calls the closed forms under test to produce an expected value.

use repeated_delegation::agents::should_reveal;
use repeated_delegation::benchmark::{f_tau, opt_threshold, BenchmarkSettings, EstimatorChoice};
use repeated_delegation::instances::{fixture, two_uniform_optimum, Sampler};
use repeated_delegation::mechanisms::{arm_grid_size, confidence_bounds, delay_for, StochasticStrategicParams};
use repeated_delegation::verify::discretization_error;

/// `E[min{X_i : X_i >= tau}]` for two iid uniforms, by midpoint quadrature.
fn quadrature_f(tau: f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let a = (i as f64 + 0.5) * h;
        for j in 0..n {
            let b = (j as f64 + 0.5) * h;
            let v = match (a >= tau, b >= tau) {
                (true, true) => a.min(b),
                (true, false) => a,
                (false, true) => b,
                (false, false) => 0.0,
            };
            acc += v;
        }
    }
    acc * h * h
}

fn grid_argmax(f: impl Fn(f64) -> f64, n: usize) -> (f64, f64) {
    (0..=n)
        .map(|i| i as f64 / n as f64)
        .map(|t| (t, f(t)))
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[test]
fn two_uniform_curve_matches_quadrature() {
    let s = Sampler::TwoUniformComplement;
    for tau in [0.0, 0.1, 0.25, 0.41421, 0.6, 0.9, 1.0] {
        let q = quadrature_f(tau, 1200);
        let a = s.analytic_f(tau).unwrap();
        assert!((q - a).abs() < 2e-3, "tau={tau}: quadrature {q} vs closed form {a}");
    }
}

#[test]
fn two_uniform_optimum_matches_grid_search() {
    // (1-t)^2 (1+2t)/3 + t(1-t^2): the two-uniform curve written out by cases
    let f = |t: f64| (1.0 - t).powi(2) * (1.0 + 2.0 * t) / 3.0 + t * (1.0 - t * t);
    let (t_grid, f_grid) = grid_argmax(f, 1_000_000);
    let (t, v) = two_uniform_optimum();
    assert!((t - t_grid).abs() < 1e-5 && (t - 0.41421).abs() < 1e-5);
    assert!((v - f_grid).abs() < 1e-9 && (v - 0.55228).abs() < 1e-5);
    assert!((v - 4.0 * (2f64.sqrt() - 1.0) / 3.0).abs() < 1e-12);
}

#[test]
fn monte_carlo_agrees_with_closed_form() {
    let inst = fixture("TwoUniformComplement").unwrap();
    let (t, v) = two_uniform_optimum();
    let est = f_tau(&inst, t, true, 400_000, 17).unwrap();
    assert!((est.mean - v).abs() < 4.0 * est.stderr + 1e-4, "{} vs {v}", est.mean);
}

#[test]
fn truncated_optimum_scales_by_support() {
    let c = 0.95;
    let s = Sampler::TwoUniformComplementTruncated { y_min: 0.05 };
    let (t, v) = s.analytic_optimum().unwrap();
    let (t_grid, v_grid) = grid_argmax(|x| s.analytic_f(x).unwrap(), 200_000);
    assert!((t - t_grid).abs() < 2e-5 && (t - c * (2f64.sqrt() - 1.0)).abs() < 1e-12);
    assert!((v - v_grid).abs() < 1e-9);
}

#[test]
fn monte_carlo_benchmark_finds_the_same_threshold() {
    let inst = fixture("TwoUniformComplement").unwrap();
    let settings = BenchmarkSettings {
        grid_size: 400,
        n_samples: 50_000,
        estimator: EstimatorChoice::MonteCarlo,
        ..BenchmarkSettings::default()
    };
    let b = opt_threshold(&inst, &settings).unwrap();
    assert!((b.tau_star - 0.41421).abs() < 0.05, "tau* = {}", b.tau_star);
    assert!((b.opt_per_round - 0.55228).abs() < 0.01);
}

#[test]
fn delay_formula_values() {
    // ceil(T_g ln(T_g / eps)) evaluated by hand
    assert_eq!(delay_for(0.9, 1e-4).unwrap(), (10.0 * (10.0f64 / 1e-4).ln()).ceil() as usize);
    assert_eq!(delay_for(0.9, 1e-4).unwrap(), 116);
    assert_eq!(delay_for(0.9, 0.025).unwrap(), 60);
    let p = StochasticStrategicParams::derive(0.9, 1.0, 0.05, 10_000).unwrap();
    assert_eq!((p.eps, p.delay, p.delta), (1e-4, 116, 1e-4));
}

#[test]
fn arm_grid_and_confidence_values() {
    assert_eq!(arm_grid_size(10_000).unwrap(), 6);
    assert_eq!(arm_grid_size(100_000).unwrap(), 10);
    let (lcb, ucb) = confidence_bounds(0.5, 100, 10_000, 0.01);
    assert!((lcb - 0.0608).abs() < 1e-4, "{lcb}");
    assert!((ucb - 0.9392).abs() < 1e-4, "{ucb}");
}

#[test]
fn hiding_boundary_is_between_280_and_285() {
    // smallest K with 0.9^K <= 1e-13, from logarithms
    let k_star = ((1e-13f64).ln() / 0.9f64.ln()).ceil() as u32;
    assert_eq!(k_star, 285);
    assert!(!should_reveal(1, 280, 0.9, 1e-14));
    assert!(!should_reveal(1, k_star - 1, 0.9, 1e-14));
    assert!(should_reveal(1, k_star, 0.9, 1e-14));
}

#[test]
fn discretization_error_matches_direct_evaluation() {
    let f = |t: f64| (1.0 - t).powi(2) * (1.0 + 2.0 * t) / 3.0 + t * (1.0 - t * t);
    let f_star = 4.0 * (2f64.sqrt() - 1.0) / 3.0;
    for q in [6usize, 8, 16, 32, 64] {
        let direct = f_star - (1..=q).map(|i| f(i as f64 / q as f64)).fold(f64::NEG_INFINITY, f64::max);
        assert!((discretization_error(q) - direct).abs() < 1e-12, "Q={q}");
    }
}
