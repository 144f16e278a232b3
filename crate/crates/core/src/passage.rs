//! First-passage-time machinery for the full-channel-inversion birth-death
//! chain on the user count. Works in the chain's natural time unit
//! (departure-rate scale normalized to 1, arrival rate lambda|D| = 1 + eps);
//! multiply by `seconds_per_unit` to convert.

use serde::{Deserialize, Serialize};

use crate::model::{NetworkParams, LN2};
use crate::{Error, Result};

/// Normalized departure rate out of state n: n / (n - 1 + sigma2) for
/// n >= 1 (the n = 1 denominator collapses to sigma2), zero at n = 0.
pub fn departure_rate(n: u64, sigma2_tilde: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    nf / (nf - 1.0 + sigma2_tilde)
}

/// Largest user count with negative drift at arrival rate 1 + eps:
/// n <= ((1+eps)/eps) (1 - sigma2). `None` when no state has negative
/// drift (sigma2 >= 1, or the bound falls below 1).
pub fn drift_bound(epsilon: f64, sigma2_tilde: f64) -> Result<Option<u64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("drift_bound: epsilon = {epsilon} must be > 0")));
    }
    if sigma2_tilde >= 1.0 {
        return Ok(None);
    }
    let bound = (1.0 + epsilon) / epsilon * (1.0 - sigma2_tilde);
    let n = bound.floor();
    if n < 1.0 {
        return Ok(None);
    }
    Ok(Some(n as u64))
}

/// E[tau_{n,n+1}] by the forward recursion
/// tau_n = (1 + dep(n) tau_{n-1}) / arrival_rate, tau_0 = 1/arrival_rate.
pub fn tau_step(n: u64, arrival_rate: f64, sigma2_tilde: f64) -> Result<f64> {
    Ok(*tau_step_table(n, arrival_rate, sigma2_tilde)?.last().expect("non-empty table"))
}

/// Full table of E[tau_{k,k+1}] for k = 0..=n_max, O(n_max).
pub fn tau_step_table(n_max: u64, arrival_rate: f64, sigma2_tilde: f64) -> Result<Vec<f64>> {
    if !(arrival_rate > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_step: arrival_rate = {arrival_rate} must be > 0")));
    }
    if !(sigma2_tilde > 0.0) {
        return Err(Error::InvalidParameter("tau_step: sigma2_tilde must be > 0".into()));
    }
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut tau = 1.0 / arrival_rate;
    out.push(tau);
    for n in 1..=n_max {
        tau = (1.0 + departure_rate(n, sigma2_tilde) * tau) / arrival_rate;
        out.push(tau);
    }
    Ok(out)
}

/// Closed form of E[tau_{n,n+1}] at arrival rate 1 + eps:
///
///   (1+eps)^-1 + sum_{i=1..n} (1+eps)^-(i+1) * (n)_i / (n-1+sigma2)_i,
///
/// with the falling-factorial ratio built multiplicatively term to term
/// (never through the gamma function, whose arguments would cross poles or
/// underflow for large n).
pub fn tau_step_closed(n: u64, epsilon: f64, sigma2_tilde: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("tau_step_closed: epsilon must be > 0".into()));
    }
    if !(sigma2_tilde > 0.0) {
        return Err(Error::InvalidParameter("tau_step_closed: sigma2_tilde must be > 0".into()));
    }
    let a = 1.0 + epsilon;
    let nf = n as f64;
    let mut sum = 1.0 / a;
    let mut prod = 1.0f64;
    let mut pow = 1.0 / a;
    for i in 1..=n {
        let j = (i - 1) as f64;
        prod *= (nf - j) / (nf - 1.0 + sigma2_tilde - j);
        pow /= a;
        sum += pow * prod;
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CumMethod {
    /// Prefix sum of the recursion table, O(n).
    Recursion,
    /// Sum of closed-form steps, O(n^2); sigma2 = 1 collapses to the exact
    /// closed expression.
    Closed,
}

/// E[tau_{0,n}] = sum_{k<n} E[tau_{k,k+1}] at arrival rate 1 + eps.
pub fn tau_cum(n: u64, epsilon: f64, sigma2_tilde: f64, method: CumMethod) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    match method {
        CumMethod::Recursion => {
            let table = tau_step_table(n - 1, 1.0 + epsilon, sigma2_tilde)?;
            Ok(table.iter().sum())
        }
        CumMethod::Closed => {
            if (sigma2_tilde - 1.0).abs() <= 1e-14 {
                let e = epsilon;
                return Ok((e * n as f64 - 1.0) / (e * e) + 1.0 / (e * e * (1.0 + e).powi(n as i32)));
            }
            let mut sum = 0.0;
            for k in 0..n {
                sum += tau_step_closed(k, epsilon, sigma2_tilde)?;
            }
            Ok(sum)
        }
    }
}

/// Passage-time table for one (eps, sigma2) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageTable {
    pub epsilon: f64,
    pub sigma2_tilde: f64,
    /// Arrival rate in chain units, 1 + eps.
    pub arrival_rate: f64,
    /// E[tau_{n,n+1}] for n = 0..=n_max.
    pub tau_step: Vec<f64>,
    /// E[tau_{0,n}] for n = 0..=n_max (first entry 0).
    pub tau_cum: Vec<f64>,
    /// Multiply chain times by this to get seconds.
    pub seconds_per_unit: f64,
}

impl PassageTable {
    pub fn build(n_max: u64, epsilon: f64, sigma2_tilde: f64) -> Result<Self> {
        let steps = tau_step_table(n_max, 1.0 + epsilon, sigma2_tilde)?;
        let mut cum = Vec::with_capacity(steps.len() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for s in &steps {
            acc += s;
            cum.push(acc);
        }
        cum.truncate(steps.len());
        Ok(PassageTable {
            epsilon,
            sigma2_tilde,
            arrival_rate: 1.0 + epsilon,
            tau_step: steps,
            tau_cum: cum,
            seconds_per_unit: 1.0,
        })
    }

    /// Attach the physical time scale ln2/(B mu) from a parameter set.
    pub fn with_time_scale(mut self, params: &NetworkParams) -> Self {
        self.seconds_per_unit = LN2 / (params.bandwidth_b * params.mu);
        self
    }
}

/// One row per sigma2: escape time against 1/sigma2, with a least-squares
/// line through the points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaSweep {
    pub n: u64,
    pub epsilon: f64,
    /// (1/sigma2, E[tau_{0,n}]).
    pub rows: Vec<(f64, f64)>,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub r_squared: f64,
}

/// Sweep E[tau_{0,n}] over a sigma2 grid and fit it linearly in 1/sigma2.
pub fn tau_sigma_sweep(n: u64, epsilon: f64, sigma2_grid: &[f64]) -> Result<SigmaSweep> {
    if sigma2_grid.len() < 2 {
        return Err(Error::InvalidParameter("tau_sigma_sweep: need at least 2 grid points".into()));
    }
    let mut rows = Vec::with_capacity(sigma2_grid.len());
    for &s2 in sigma2_grid {
        rows.push((1.0 / s2, tau_cum(n, epsilon, s2, CumMethod::Recursion)?));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(SigmaSweep { n, epsilon, rows, fit_slope: slope, fit_intercept: intercept, r_squared: r2 })
}

/// Ordinary least squares through (x, y); returns (slope, intercept, R^2).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
