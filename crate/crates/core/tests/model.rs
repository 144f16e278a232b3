use approx::assert_relative_eq;
use sbd_core::model::*;

fn baseline() -> NetworkParams {
    NetworkParams::baseline()
}

#[test]
fn baseline_parameters() {
    let p = baseline();
    assert_eq!(p.mu, 0.01);
    assert_eq!(p.bandwidth_b, 1e6);
    assert_eq!(p.sigma2_tilde, 1e-8);
    assert_eq!(p.radius_r, 100.0);
    assert_eq!(p.eta, 4.0);
    assert_relative_eq!(p.area(), std::f64::consts::PI * 1e4, max_relative = 1e-15);
    p.validate().unwrap();
}

#[test]
fn validate_rejects_bad_parameters() {
    let mut p = baseline();
    p.lambda = -1.0;
    assert!(p.validate().is_err());
    let mut p = baseline();
    p.inversion_l = 1.5;
    assert!(p.validate().is_err());
    let mut p = baseline();
    p.eta = 0.0;
    assert!(p.validate().is_err());
    let mut p = baseline();
    p.sigma2_tilde = 0.0;
    assert!(p.validate().is_err());
    let mut p = baseline();
    p.radius_r = 0.0;
    assert!(p.validate().is_err());
}

#[test]
fn path_loss_values() {
    assert_relative_eq!(path_loss(0.0, 4.0).unwrap(), 1.0);
    assert_relative_eq!(path_loss(1.0, 4.0).unwrap(), 1.0 / 16.0, max_relative = 1e-15);
    assert_relative_eq!(path_loss(9.0, 4.0).unwrap(), 1e-4, max_relative = 1e-12);
    assert!(path_loss(-1.0, 4.0).is_err());
}

#[test]
fn effective_gain_interpolates_inversion() {
    let mut p = baseline();
    // No inversion: the raw path loss.
    p.inversion_l = 0.0;
    assert_relative_eq!(
        effective_gain(3.0, &p).unwrap(),
        path_loss(3.0, 4.0).unwrap(),
        max_relative = 1e-15
    );
    // Full inversion: unity received power everywhere.
    p.inversion_l = 1.0;
    assert_relative_eq!(effective_gain(3.0, &p).unwrap(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(effective_gain(87.0, &p).unwrap(), 1.0, max_relative = 1e-15);
    // Halfway: L^(1-l) = (1+r)^(-eta/2).
    p.inversion_l = 0.5;
    assert_relative_eq!(
        effective_gain(3.0, &p).unwrap(),
        4f64.powf(-2.0),
        max_relative = 1e-12
    );
}

#[test]
fn rate_low_sinr_matches_definition() {
    let p = baseline();
    let g = 0.2;
    let i = 0.5;
    let want = p.bandwidth_b / std::f64::consts::LN_2 * g / (i + p.sigma2_tilde);
    assert_relative_eq!(rate_low_sinr(g, i, &p), want, max_relative = 1e-15);
}

#[test]
fn rate_general_matches_shannon() {
    let p = baseline();
    let g = 1e-8; // SINR = 0.5 at interference 1e-8 with sigma2 = 1e-8
    let want = p.bandwidth_b * (1.5f64).log2();
    assert_relative_eq!(rate_general(g, 1e-8, &p), want, max_relative = 1e-12);
}

#[test]
fn rate_dispatch_follows_mode() {
    let mut p = baseline();
    p.rate_mode = RateMode::LowSinr;
    assert_eq!(rate(0.1, 0.3, &p), rate_low_sinr(0.1, 0.3, &p));
    p.rate_mode = RateMode::General;
    assert_eq!(rate(0.1, 0.3, &p), rate_general(0.1, 0.3, &p));
}

#[test]
fn critical_rate_baseline_value() {
    // B mu / (ln2 |D|) at the baseline cell.
    let lc = critical_rate(&baseline());
    assert_relative_eq!(lc, 0.4592240942632852, max_relative = 1e-14);
    // Rounds to the usual quoted 0.4592.
    assert!((lc - 0.45918).abs() < 1e-4);
}

#[test]
fn critical_rate_ignores_channel_details() {
    let mut p = baseline();
    let lc = critical_rate(&p);
    p.eta = 6.0;
    p.inversion_l = 0.7;
    p.sigma2_tilde = 1e-2;
    p.rate_mode = RateMode::General;
    assert_eq!(critical_rate(&p), lc);
}

#[test]
fn classify_stable() {
    let mut p = baseline();
    p.lambda = 0.3;
    let rep = classify_regime(&p).unwrap();
    assert_eq!(rep.regime, Regime::Stable);
    assert!(!rep.at_boundary);
    assert!(rep.lambda_upper.is_none());
}

#[test]
fn classify_boundary_counts_as_unstable() {
    let mut p = baseline();
    p.lambda = critical_rate(&p);
    let rep = classify_regime(&p).unwrap();
    assert_eq!(rep.regime, Regime::Unstable);
    assert!(rep.at_boundary);
}

#[test]
fn classify_metastable_full_inversion() {
    // l = 1 keeps two fixed points well past lambda_c.
    let mut p = baseline();
    p.inversion_l = 1.0;
    p.lambda = 0.8;
    let rep = classify_regime(&p).unwrap();
    assert_eq!(rep.regime, Regime::Metastable);
    let upper = rep.lambda_upper.expect("two-solution window has an upper edge");
    assert!(upper > p.lambda);
}

#[test]
fn classify_unstable_beyond_window() {
    // At sigma2 = 0.01 the two-solution window closes at C ~ 37; C ~ 43
    // sits past it.
    let mut p = baseline();
    p.inversion_l = 1.0;
    p.sigma2_tilde = 0.01;
    p.lambda = 20.0;
    let rep = classify_regime(&p).unwrap();
    assert_eq!(rep.regime, Regime::Unstable);
    assert!(!rep.at_boundary);
}
