//! Physical model: disk geometry, path loss, fractional power control, rate
//! functions, the critical arrival rate and regime classification.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LN2: f64 = std::f64::consts::LN_2;

/// How a user's service rate is computed from its SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RateMode {
    /// Linearized low-SINR rate (B/ln2) * SINR.
    #[default]
    LowSinr,
    /// Shannon rate B * log2(1 + SINR), interference treated as noise.
    General,
}

/// All physical constants of the cell. Single source of truth for every
/// other module.
///
/// Units: `lambda` in users/m^2/s, `mu` in 1/bits (reciprocal mean file
/// size), `bandwidth_b` in Hz, `radius_r` in meters. `sigma2_tilde` is the
/// noise power normalized by the transmit power, dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub lambda: f64,
    pub mu: f64,
    pub bandwidth_b: f64,
    pub sigma2_tilde: f64,
    /// Fractional channel inversion factor in [0, 1]: transmit power is
    /// proportional to L(r)^l, so the received power scales as L(r)^(1-l).
    pub inversion_l: f64,
    pub eta: f64,
    pub radius_r: f64,
    pub rate_mode: RateMode,
}

impl NetworkParams {
    /// Reference parameter set: B = 1 MHz, mean file 100 bits, sigma2 = 1e-8
    /// (-50 dBm over unit transmit power), R = 100 m, eta = 4, fixed power.
    pub fn baseline() -> Self {
        NetworkParams {
            lambda: 0.3,
            mu: 0.01,
            bandwidth_b: 1e6,
            sigma2_tilde: 1e-8,
            inversion_l: 0.0,
            eta: 4.0,
            radius_r: 100.0,
            rate_mode: RateMode::LowSinr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.mu > 0.0) {
            return bad("mu must be > 0");
        }
        if !(self.bandwidth_b > 0.0) {
            return bad("bandwidth_b must be > 0");
        }
        if !(self.sigma2_tilde > 0.0) {
            return bad("sigma2_tilde must be > 0");
        }
        if !(0.0..=1.0).contains(&self.inversion_l) {
            return bad("inversion_l must lie in [0, 1]");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be > 0");
        }
        if !(self.radius_r > 0.0) {
            return bad("radius_r must be > 0");
        }
        Ok(())
    }

    /// Cell area |D| = pi R^2 in m^2.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius_r * self.radius_r
    }

    /// Total arrival rate over the cell, users/s.
    pub fn arrival_rate_cell(&self) -> f64 {
        self.lambda * self.area()
    }

    /// Offered bit load per area, rho = lambda/mu, bits/s/m^2.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Dimensionless load constant C = rho * ln2 * |D| / B.
    pub fn c_value(&self) -> f64 {
        self.rho() * LN2 * self.area() / self.bandwidth_b
    }
}

/// Path loss L(r) = (1+r)^(-eta): bounded, non-increasing, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub eta: f64,
}

impl PathLossModel {
    pub fn gain(&self, r: f64) -> f64 {
        (1.0 + r).powf(-self.eta)
    }
}

pub fn path_loss(r: f64, eta: f64) -> Result<f64> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "path_loss: distance r = {r} must be finite and >= 0"
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("path_loss: eta = {eta} must be > 0")));
    }
    Ok((1.0 + r).powf(-eta))
}

/// Received-power gain after fractional inversion, L(r)^(1-l).
pub fn effective_gain(r: f64, params: &NetworkParams) -> Result<f64> {
    if r < 0.0 || r > params.radius_r {
        return Err(Error::InvalidParameter(format!(
            "effective_gain: r = {r} outside the cell [0, {}]",
            params.radius_r
        )));
    }
    Ok((1.0 + r).powf(-params.eta * (1.0 - params.inversion_l)))
}

/// Linearized low-SINR service rate, bits/s.
pub fn rate_low_sinr(gain_self: f64, interference_sum: f64, params: &NetworkParams) -> f64 {
    debug_assert!(gain_self > 0.0 && interference_sum >= 0.0);
    params.bandwidth_b / LN2 * gain_self / (interference_sum + params.sigma2_tilde)
}

/// Shannon rate treating interference as noise, bits/s. Always at most
/// `rate_low_sinr` for the same inputs.
pub fn rate_general(gain_self: f64, interference_sum: f64, params: &NetworkParams) -> f64 {
    debug_assert!(gain_self > 0.0 && interference_sum >= 0.0);
    params.bandwidth_b * (1.0 + gain_self / (interference_sum + params.sigma2_tilde)).log2()
}

/// Service rate under the configured `rate_mode`.
pub fn rate(gain_self: f64, interference_sum: f64, params: &NetworkParams) -> f64 {
    match params.rate_mode {
        RateMode::LowSinr => rate_low_sinr(gain_self, interference_sum, params),
        RateMode::General => rate_general(gain_self, interference_sum, params),
    }
}

/// Critical arrival rate lambda_c = B*mu/(ln2 * |D|), users/m^2/s. The same
/// threshold holds for both rate modes and does not depend on eta, l, or the
/// noise level.
pub fn critical_rate(params: &NetworkParams) -> f64 {
    params.bandwidth_b * params.mu / (LN2 * params.area())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Stable,
    Metastable,
    Unstable,
}

/// Regime classification together with the thresholds that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// True when lambda sits numerically on the critical threshold; the
    /// `regime` field is then reported as Unstable (no stationary regime at
    /// the threshold itself).
    pub at_boundary: bool,
    pub lambda_c: f64,
    /// Upper edge of the two-solution window, when one exists and
    /// lambda > lambda_c.
    pub lambda_upper: Option<f64>,
}

/// Classify the configured arrival rate: below lambda_c the network is
/// stable; above it, metastable when the first-order fixed point still has
/// two solutions, unstable otherwise.
pub fn classify_regime(params: &NetworkParams) -> Result<RegimeReport> {
    params.validate()?;
    let lambda_c = critical_rate(params);
    let rel = (params.lambda - lambda_c) / lambda_c;
    if rel.abs() <= 1e-12 {
        return Ok(RegimeReport {
            regime: Regime::Unstable,
            at_boundary: true,
            lambda_c,
            lambda_upper: None,
        });
    }
    if params.lambda < lambda_c {
        return Ok(RegimeReport {
            regime: Regime::Stable,
            at_boundary: false,
            lambda_c,
            lambda_upper: None,
        });
    }
    let solutions = crate::first_order::solve_fixed_point(params.lambda, params)?;
    let (_, lambda_upper) = crate::first_order::metastable_window(params)?;
    let regime = if solutions.len() == 2 { Regime::Metastable } else { Regime::Unstable };
    Ok(RegimeReport { regime, at_boundary: false, lambda_c, lambda_upper })
}
