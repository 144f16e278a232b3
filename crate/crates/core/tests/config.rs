use approx::assert_relative_eq;
use sbd_core::config::*;
use sbd_core::model::RateMode;

#[test]
fn default_round_trips_through_toml() {
    let cfg = ExperimentConfig::default();
    let text = cfg.to_toml().unwrap();
    let back = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn unknown_keys_are_rejected() {
    let err = ExperimentConfig::from_toml("[network]\nbandwidth_mhz = 1\n").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("bandwidth_mhz"), "unhelpful error: {msg}");
}

#[test]
fn noise_defaults_to_minus_50_dbm() {
    let cfg = NetworkConfig::default();
    let p = cfg.to_params().unwrap();
    assert_relative_eq!(p.sigma2_tilde, 1e-8, max_relative = 1e-12);
}

#[test]
fn noise_dbm_conversion() {
    let mut cfg = NetworkConfig::default();
    cfg.sigma2_dbm = Some(-50.0);
    assert_relative_eq!(cfg.to_params().unwrap().sigma2_tilde, 1e-8, max_relative = 1e-12);
    cfg.sigma2_dbm = Some(-30.0);
    assert_relative_eq!(cfg.to_params().unwrap().sigma2_tilde, 1e-6, max_relative = 1e-12);
    cfg.sigma2_dbm = Some(30.0);
    assert_relative_eq!(cfg.to_params().unwrap().sigma2_tilde, 1.0, max_relative = 1e-12);
}

#[test]
fn noise_given_both_ways_is_an_error() {
    let mut cfg = NetworkConfig::default();
    cfg.sigma2_tilde = Some(1e-8);
    cfg.sigma2_dbm = Some(-50.0);
    assert!(cfg.to_params().is_err());
}

#[test]
fn rate_mode_parses() {
    let cfg = ExperimentConfig::from_toml("[network]\nrate_mode = \"general\"\n").unwrap();
    assert_eq!(cfg.network.to_params().unwrap().rate_mode, RateMode::General);
}

#[test]
fn invalid_physics_rejected_at_parse_time() {
    let cfg = ExperimentConfig::from_toml("[network]\ninversion_l = 1.5\n").unwrap();
    assert!(cfg.network.to_params().is_err());
}

#[test]
fn overrides_apply_dotted_keys() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_override("network.lambda_per_m2_s = 0.425").unwrap();
    cfg.apply_override("sim.horizon=500000").unwrap();
    cfg.apply_override("solver.weight_d = 0.0").unwrap();
    cfg.apply_override("seed = 42").unwrap();
    assert_relative_eq!(cfg.network.lambda_per_m2_s, 0.425);
    assert_eq!(cfg.sim.horizon, 500_000);
    assert_eq!(cfg.seed, 42);
}

#[test]
fn overrides_reject_nonsense() {
    let mut cfg = ExperimentConfig::default();
    assert!(cfg.apply_override("no_equals_sign").is_err());
    assert!(cfg.apply_override("nonexistent_section.key = 1").is_err());
    // Type mismatches surface when the document is deserialized back.
    assert!(cfg.apply_override("sim.horizon = \"many\"").is_err());
}

#[test]
fn sim_config_to_options() {
    let mut cfg = SimConfig::default();
    cfg.n_bands = 4;
    cfg.horizon = 12345;
    let o = cfg.to_options(7);
    assert_eq!(o.seed, 7);
    assert_eq!(o.n_bands, 4);
    assert_eq!(o.horizon, 12345);
}

#[test]
fn solver_config_weights_default_convex() {
    let cfg = SolverConfig::default();
    cfg.weights().validate().unwrap();
    assert_eq!(cfg.n_r, 32);
    assert_eq!(cfg.n_theta, 16);
}
