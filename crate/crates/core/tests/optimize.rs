use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use caffeine::optimize::{
    dual_anneal, dual_anneal_with_abort, Bounds, DualAnnealingConfig, TerminationReason,
};

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
            .sum::<f64>()
}

fn config(evals: usize, seed: u64) -> DualAnnealingConfig {
    DualAnnealingConfig {
        max_function_evals: evals,
        rng_seed: seed,
        ..DualAnnealingConfig::default()
    }
}

#[test]
fn finds_the_global_minimum_of_rastrigin() {
    let bounds = Bounds::uniform(3, -5.12, 5.12).unwrap();
    let r = dual_anneal(&rastrigin, &bounds, &config(20_000, 11)).unwrap();
    assert!(r.best_cost < 1e-8, "{r:?}");
    assert!(r.best_params.iter().all(|x| x.abs() < 1e-4));
}

#[test]
fn shifted_quadratic_near_a_bound() {
    let f = |x: &[f64]| (x[0] - 0.99).powi(2) + (x[1] + 0.3).powi(2);
    let bounds = Bounds::new(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let r = dual_anneal(&f, &bounds, &config(2000, 3)).unwrap();
    assert!((r.best_params[0] - 0.99).abs() < 1e-5 && (r.best_params[1] + 0.3).abs() < 1e-5);
}

#[test]
fn same_seed_same_result_different_seed_different_path() {
    let bounds = Bounds::uniform(2, -5.12, 5.12).unwrap();
    let a = dual_anneal(&rastrigin, &bounds, &config(500, 9)).unwrap();
    let b = dual_anneal(&rastrigin, &bounds, &config(500, 9)).unwrap();
    let c = dual_anneal(&rastrigin, &bounds, &config(500, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.cost_trace, c.cost_trace);
}

#[test]
fn budget_and_bounds_are_respected() {
    let bounds = Bounds::new(&[(0.5, 0.7), (-2.0, -1.0)]).unwrap();
    let calls = AtomicUsize::new(0);
    let f = |x: &[f64]| {
        calls.fetch_add(1, Ordering::Relaxed);
        assert!(
            x[0] >= 0.5 && x[0] <= 0.7 && x[1] >= -2.0 && x[1] <= -1.0,
            "{x:?}"
        );
        rastrigin(x)
    };
    let r = dual_anneal(&f, &bounds, &config(137, 1)).unwrap();
    assert!(r.evaluation_count <= 137);
    assert_eq!(r.evaluation_count, calls.load(Ordering::Relaxed));
    assert_eq!(r.cost_trace.len(), r.evaluation_count);
    assert_eq!(r.termination_reason, TerminationReason::BudgetExhausted);
}

#[test]
fn target_cost_stops_early() {
    let f = |x: &[f64]| x[0] * x[0];
    let bounds = Bounds::uniform(1, -1.0, 1.0).unwrap();
    let cfg = DualAnnealingConfig {
        target_cost: Some(1e-6),
        ..config(10_000, 2)
    };
    let r = dual_anneal(&f, &bounds, &cfg).unwrap();
    assert_eq!(r.termination_reason, TerminationReason::Converged);
    assert!(r.best_cost <= 1e-6 && r.evaluation_count < 10_000);
}

#[test]
fn abort_returns_best_so_far() {
    let abort = AtomicBool::new(false);
    let calls = AtomicUsize::new(0);
    let f = |x: &[f64]| {
        if calls.fetch_add(1, Ordering::Relaxed) == 20 {
            abort.store(true, Ordering::Relaxed);
        }
        rastrigin(x)
    };
    let bounds = Bounds::uniform(2, -5.12, 5.12).unwrap();
    let r = dual_anneal_with_abort(&f, &bounds, &config(10_000, 4), Some(&abort)).unwrap();
    assert_eq!(r.termination_reason, TerminationReason::UserAbort);
    assert!(r.evaluation_count < 100 && r.best_cost.is_finite());
}

#[test]
fn non_finite_costs_are_counted_and_avoided() {
    let f = |x: &[f64]| {
        if x[0] < 0.0 {
            f64::NAN
        } else {
            (x[0] - 0.5).powi(2)
        }
    };
    let bounds = Bounds::uniform(1, -1.0, 1.0).unwrap();
    let r = dual_anneal(&f, &bounds, &config(1000, 5)).unwrap();
    assert!(r.nonfinite_evaluations > 0);
    assert!((r.best_params[0] - 0.5).abs() < 1e-5);
}

#[test]
fn invalid_settings_are_rejected() {
    let bounds = Bounds::uniform(1, -1.0, 1.0).unwrap();
    let outside = DualAnnealingConfig {
        x0: Some(vec![2.0]),
        ..DualAnnealingConfig::default()
    };
    assert!(dual_anneal(&rastrigin, &bounds, &outside).is_err());
    let shape = DualAnnealingConfig {
        visiting_distribution_shape: 3.5,
        ..DualAnnealingConfig::default()
    };
    assert!(dual_anneal(&rastrigin, &bounds, &shape).is_err());
    assert!(Bounds::new(&[(1.0, 1.0)]).is_err());
}
