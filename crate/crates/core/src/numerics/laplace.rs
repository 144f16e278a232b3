use crate::model::NetworkParams;
use crate::{Error, Result};

use super::quad::{integrate, QuadratureSpec};

// 8-point Gauss-Legendre rule on [-1, 1] (positive half; symmetric).
const GL8_X: [f64; 4] = [
    0.183434642495649804939476142360184,
    0.525532409916328985817739049189246,
    0.796666477413626739591553936475830,
    0.960289856497536231683560868569473,
];
const GL8_W: [f64; 4] = [
    0.362683783378361982965150449277196,
    0.313706645877887287337962201986601,
    0.222381034453374470544355994426241,
    0.101228536290376259152531354309962,
];
const RADIAL_PANELS: usize = 48;

/// Fixed radial quadrature profile of the disk for a given parameter set:
/// per node j it carries the received-power gain p_j = L(r_j)^(1-l) and the
/// area-weighted density factor d_j = L(r_j)^(l-1) * (2 pi r_j w_j), so that
/// sums over j approximate integrals over the disk.
///
/// A smooth composite Gauss-Legendre grid is deliberately fixed (not
/// adaptive) so that mass profiles are cheap to rescale and exactly
/// consistent between the total-mass normalization and the exponent sums.
#[derive(Debug, Clone)]
pub struct DiskProfile {
    pub r: Vec<f64>,
    /// L(r_j)^(1-l), the per-user received gain at node j.
    pub gain: Vec<f64>,
    /// L(r_j)^(l-1) * area weight: integrates the mean-field density shape.
    pub density_weight: Vec<f64>,
    /// Plain area weights (sum to |D|).
    pub area_weight: Vec<f64>,
    /// Total of `density_weight`: int_D L^(l-1) dy.
    pub a_inf: f64,
}

impl DiskProfile {
    pub fn new(params: &NetworkParams) -> Self {
        let radius = params.radius_r;
        let em = params.eta * (1.0 - params.inversion_l);
        let n = RADIAL_PANELS * 8;
        let mut r = Vec::with_capacity(n);
        let mut gain = Vec::with_capacity(n);
        let mut density_weight = Vec::with_capacity(n);
        let mut area_weight = Vec::with_capacity(n);
        let h = radius / RADIAL_PANELS as f64;
        for p in 0..RADIAL_PANELS {
            let c = (p as f64 + 0.5) * h;
            for j in 0..4 {
                for sign in [-1.0, 1.0] {
                    let rj = c + sign * 0.5 * h * GL8_X[j];
                    let wj = 0.5 * h * GL8_W[j];
                    let aj = 2.0 * std::f64::consts::PI * rj * wj;
                    let g = (1.0 + rj).powf(-em);
                    r.push(rj);
                    gain.push(g);
                    density_weight.push(aj / g);
                    area_weight.push(aj);
                }
            }
        }
        let a_inf = density_weight.iter().sum();
        DiskProfile { r, gain, density_weight, area_weight, a_inf }
    }
}

/// Inner disk integral of the mean-field exponent,
/// g(t) = int_D (1 - e^{-t L(y)^(1-l)}) L(y)^(l-1) dy,
/// by adaptive quadrature. Monotone in t, saturating at int_D L^(l-1) dy.
pub fn g_inner(t: f64, params: &NetworkParams, spec: &QuadratureSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("g_inner: t = {t} < 0")));
    }
    let em = params.eta * (1.0 - params.inversion_l);
    let res = integrate(
        |r| {
            let g = (1.0 + r).powf(-em);
            (-(-t * g).exp_m1()) / g * r
        },
        0.0,
        params.radius_r,
        spec,
    )?;
    Ok(2.0 * std::f64::consts::PI * res.value)
}

/// Semi-infinite integral
///
///   I = int_0^inf e^{-sigma2 t} exp(-sum_j m_j (1 - e^{-t p_j})) dt
///
/// for non-negative masses m_j with decay rates p_j > 0. Integrated over
/// geometrically growing panels until the exponent sum saturates, then
/// closed with the analytic tail e^{-sum m_j} e^{-sigma2 b} / sigma2.
/// This keeps the slow e^{-sigma2 t} factor exact even when sigma2 is many
/// orders of magnitude below the fastest p_j.
pub fn laplace_exponent_integral(
    sigma2: f64,
    masses: &[(f64, f64)],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("laplace integral: sigma2 = {sigma2} <= 0")));
    }
    if sigma2 < 1e-12 {
        log::warn!("laplace integral: sigma2 = {sigma2:e} < 1e-12, analytic tail dominates; result is tail-limited");
    }
    let a_inf: f64 = masses.iter().map(|&(_, m)| m).sum();
    if a_inf == 0.0 {
        return Ok(1.0 / sigma2);
    }
    let g = |t: f64| -> f64 {
        masses.iter().map(|&(p, m)| m * (-(-t * p).exp_m1())).sum()
    };
    let integrand = |t: f64| (-sigma2 * t - g(t)).exp();
    let s0: f64 = sigma2 + masses.iter().map(|&(p, m)| m * p).sum::<f64>();
    let mut a = 0.0f64;
    let mut b = 0.5 / s0;
    let mut total = 0.0f64;
    let panel_spec = QuadratureSpec { max_subdivisions: 200, ..*spec };
    for _ in 0..256 {
        total += integrate(integrand, a, b, &panel_spec)?.value;
        let gb = g(b);
        if gb >= (1.0 - 1e-12) * a_inf {
            total += (-a_inf).exp() * (-sigma2 * b).exp() / sigma2;
            return Ok(total);
        }
        if sigma2 * b > 745.0 {
            // Remaining mass is below the underflow threshold.
            return Ok(total);
        }
        a = b;
        b *= 2.0;
    }
    Err(Error::NoConvergence(
        "laplace integral: exponent failed to saturate within panel budget".into(),
    ))
}

/// Outer t-integral of the first-order fixed point for a scalar intensity
/// factor Z: int_0^inf e^{-t sigma2} exp(-Z g_inner(t)) dt.
pub fn outer_t_integral(z: f64, params: &NetworkParams, spec: &QuadratureSpec) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter(format!("outer_t_integral: Z = {z} < 0")));
    }
    let profile = DiskProfile::new(params);
    outer_t_integral_with_profile(z, &profile, params, spec)
}

/// As `outer_t_integral`, reusing a precomputed profile (the hot path for
/// sweeps and solvers).
pub fn outer_t_integral_with_profile(
    z: f64,
    profile: &DiskProfile,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if params.inversion_l == 1.0 {
        // All gains are 1: the exponent collapses to a single mass Z|D|.
        let masses = [(1.0, z * params.area())];
        return laplace_exponent_integral(params.sigma2_tilde, &masses, spec);
    }
    let masses: Vec<(f64, f64)> = profile
        .gain
        .iter()
        .zip(&profile.density_weight)
        .map(|(&p, &d)| (p, z * d))
        .collect();
    laplace_exponent_integral(params.sigma2_tilde, &masses, spec)
}
