use approx::assert_relative_eq;
use sbd_core::model::NetworkParams;
use sbd_core::passage::*;

#[test]
fn departure_rate_values() {
    assert_eq!(departure_rate(0, 0.5), 0.0);
    // n = 1: the lone user sees only noise.
    assert_relative_eq!(departure_rate(1, 0.5), 2.0);
    assert_relative_eq!(departure_rate(2, 0.5), 2.0 / 1.5);
    // Saturates at 1 from above for sigma2 < 1.
    assert!(departure_rate(1000, 0.5) > 1.0);
    assert_relative_eq!(departure_rate(1000, 0.5), 1.0, max_relative = 1e-3);
    // And from below for sigma2 > 1.
    assert!(departure_rate(1000, 2.0) < 1.0);
}

#[test]
fn drift_bound_values() {
    // floor(((1+eps)/eps)(1 - sigma2)).
    assert_eq!(drift_bound(0.01, 1e-4).unwrap(), Some(100));
    assert_eq!(drift_bound(0.1, 0.5).unwrap(), Some(5));
    // No negative-drift states once the noise dominates.
    assert_eq!(drift_bound(0.01, 1.0).unwrap(), None);
    assert_eq!(drift_bound(0.01, 2.0).unwrap(), None);
    // Bound below 1.
    assert_eq!(drift_bound(10.0, 0.5).unwrap(), None);
    assert!(drift_bound(0.0, 0.5).is_err());
}

#[test]
fn tau_step_hand_values() {
    // a = 2, sigma2 = 1: tau_0 = 1/2, tau_1 = (1 + 1 * 1/2)/2 = 3/4.
    assert_relative_eq!(tau_step(0, 2.0, 1.0).unwrap(), 0.5);
    assert_relative_eq!(tau_step(1, 2.0, 1.0).unwrap(), 0.75);
    // Same number through the closed form (eps = 1).
    assert_relative_eq!(tau_step_closed(1, 1.0, 1.0).unwrap(), 0.75, max_relative = 1e-14);
}

#[test]
fn tau_step_closed_matches_recursion() {
    let (eps, s2) = (0.01, 0.01);
    let a = 1.0 + eps;
    let table = tau_step_table(500, a, s2).unwrap();
    for &n in &[0u64, 1, 2, 10, 100, 500] {
        let closed = tau_step_closed(n, eps, s2).unwrap();
        assert_relative_eq!(closed, table[n as usize], max_relative = 1e-10);
    }
    // Frozen reference at n = 500.
    assert_relative_eq!(tau_step_closed(500, 0.01, 0.01).unwrap(), 469.40905, max_relative = 1e-6);
}

#[test]
fn tau_cum_methods_agree() {
    for &(n, eps, s2) in &[(200u64, 0.05, 0.3), (100, 0.01, 2.0), (50, 0.5, 0.9)] {
        let a = tau_cum(n, eps, s2, CumMethod::Recursion).unwrap();
        let b = tau_cum(n, eps, s2, CumMethod::Closed).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }
    assert_eq!(tau_cum(0, 0.01, 0.5, CumMethod::Recursion).unwrap(), 0.0);
}

#[test]
fn tau_cum_unit_noise_closed_form() {
    // sigma2 = 1 makes the chain M/M/1-like with the exact expression
    // (eps n - 1)/eps^2 + 1/(eps^2 (1+eps)^n).
    let (n, eps) = (300u64, 0.02);
    let exact = (eps * n as f64 - 1.0) / (eps * eps)
        + 1.0 / (eps * eps * (1.0 + eps).powi(n as i32));
    assert_relative_eq!(
        tau_cum(n, eps, 1.0, CumMethod::Closed).unwrap(),
        exact,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        tau_cum(n, eps, 1.0, CumMethod::Recursion).unwrap(),
        exact,
        max_relative = 1e-9
    );
}

#[test]
fn escape_time_frozen_references() {
    // E[tau_{0,30000}] at eps = 0.01 for the noise levels used in the
    // metastability comparison; frozen from an independent evaluation of the
    // recursion in extended precision.
    let lo = tau_cum(30_000, 0.01, 0.01, CumMethod::Recursion).unwrap();
    let hi = tau_cum(30_000, 0.01, 11.0, CumMethod::Recursion).unwrap();
    assert_relative_eq!(lo, 4041855.2, max_relative = 1e-6);
    assert_relative_eq!(hi, 2652800.6, max_relative = 1e-6);
}

#[test]
fn escape_time_decreasing_in_noise() {
    // More noise lowers the service-rate advantage at small n, so the climb
    // to any level gets faster.
    let mut prev = f64::INFINITY;
    for &s2 in &[0.01, 0.1, 1.0, 5.0, 11.0] {
        let t = tau_cum(10_000, 0.01, s2, CumMethod::Recursion).unwrap();
        assert!(t < prev, "tau not decreasing at sigma2 = {s2}");
        prev = t;
    }
}

#[test]
fn passage_table_consistency() {
    let t = PassageTable::build(100, 0.05, 0.3).unwrap();
    assert_eq!(t.tau_step.len(), 101);
    assert_eq!(t.tau_cum.len(), 101);
    assert_eq!(t.tau_cum[0], 0.0);
    // Cumulative entries are prefix sums of the steps.
    let mut acc = 0.0;
    for n in 1..=100usize {
        acc += t.tau_step[n - 1];
        assert_relative_eq!(t.tau_cum[n], acc, max_relative = 1e-12);
    }
    assert_relative_eq!(t.arrival_rate, 1.05);
    // The physical time scale is ln2/(B mu).
    let p = NetworkParams::baseline();
    let t = t.with_time_scale(&p);
    assert_relative_eq!(t.seconds_per_unit, std::f64::consts::LN_2 / 1e4, max_relative = 1e-14);
}

#[test]
fn sigma_sweep_is_linear_in_inverse_noise() {
    // Escape times grow linearly in 1/sigma2 over the small-noise range.
    let grid: Vec<f64> = (0..25)
        .map(|i| 1e-4 * (1e-1f64 / 1e-4).powf(i as f64 / 24.0))
        .collect();
    let sweep = tau_sigma_sweep(20_000, 0.01, &grid).unwrap();
    assert_eq!(sweep.rows.len(), 25);
    assert!(sweep.fit_slope > 0.0);
    assert!(
        sweep.r_squared > 0.99,
        "R^2 = {} below 0.99",
        sweep.r_squared
    );
}

#[test]
fn linear_fit_exact_line() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 0.5).collect();
    let (m, b, r2) = linear_fit(&xs, &ys);
    assert_relative_eq!(m, 3.0, max_relative = 1e-12);
    assert_relative_eq!(b, -0.5, max_relative = 1e-10);
    assert_relative_eq!(r2, 1.0, max_relative = 1e-12);
}
