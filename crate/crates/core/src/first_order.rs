//! First-order (Poisson) mean-field stationary regime: the scalar fixed
//! point for the intensity factor Z*, the load function f, solution
//! counting under full channel inversion, and the lambda(nbar) sweep whose
//! fold creates the metastable window.

use serde::{Deserialize, Serialize};

use crate::model::{critical_rate, NetworkParams, LN2};
use crate::numerics::{
    bracketed_root, integrate, kummer_1f1, outer_t_integral_with_profile, DiskProfile,
    QuadratureSpec,
};
use crate::{Error, Result};

/// Which side of the fold a fixed-point solution sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Lower,
    Upper,
}

/// One solution of the first-order fixed point at a given arrival rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FoSolution {
    /// Intensity factor: the stationary intensity is z_star * L(r)^(l-1).
    pub z_star: f64,
    /// Mean user count over the cell.
    pub nbar: f64,
    /// Arrival rate this solution satisfies (users/m^2/s).
    pub lambda: f64,
    pub branch: Branch,
    /// |lambda(nbar) - lambda| at the returned point.
    pub residual: f64,
    /// Set when the solution sits on a numerically indistinguishable double
    /// root (arrival rate at the fold point).
    pub tangency: bool,
}

/// Multiplicity of the full-inversion fixed point at load C.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolutionCount {
    pub count: u8,
    pub c_value: f64,
    /// Peak value of f (only when sigma2 < 1, where f overshoots 1).
    pub c1: Option<f64>,
    /// Analytic bracket for the peak: (max(e^-1/sigma2, 1), 0.5^(sigma2-1) (1 + 1/sigma2)).
    pub c1_bounds: Option<(f64, f64)>,
    /// C sits numerically on a multiplicity boundary (C = 1 or C = C1).
    pub degenerate: bool,
}

const SCALED_SWITCH_NBAR: f64 = 30.0;

/// Load function of the full-inversion fixed point:
///
///   f(nbar) = (nbar e^-nbar / sigma2) * 1F1(sigma2; sigma2+1; nbar).
///
/// f(0) = 0 and f -> 1 as nbar -> infinity. Below the series switch point
/// the definition is evaluated directly; above it, through the equivalent
/// scaled integral
///
///   f(nbar) = int_0^nbar e^-s (1 - s/nbar)^(sigma2-1) ds,
///
/// with the integrable endpoint spike s -> nbar handled by the exact series
/// sum_k 1/(k! (k+sigma2)) so no quadrature ever touches the singularity.
pub fn f_meanfield(nbar: f64, sigma2_tilde: f64) -> Result<f64> {
    check_f_args(nbar, sigma2_tilde)?;
    if nbar == 0.0 {
        return Ok(0.0);
    }
    if nbar <= SCALED_SWITCH_NBAR {
        let hyp = kummer_1f1(sigma2_tilde, sigma2_tilde + 1.0, nbar)?;
        return Ok(nbar * (-nbar).exp() / sigma2_tilde * hyp);
    }
    // Smooth part: s in [0, nbar-1], integrand bounded by e^-s * nbar.
    let spec = QuadratureSpec::default();
    let cut = (nbar - 1.0).min(745.0);
    let smooth = integrate(
        |s| (-s).exp() * (1.0 - s / nbar).powf(sigma2_tilde - 1.0),
        0.0,
        cut,
        &spec,
    )?
    .value;
    // Endpoint piece: substituting y = nbar - s over the last unit interval
    // gives e^-nbar nbar^(1-sigma2) int_0^1 e^y y^(sigma2-1) dy, and the
    // remaining integral expands termwise to sum_k 1/(k! (k+sigma2)).
    let endpoint = (-nbar).exp() * nbar.powf(1.0 - sigma2_tilde) * endpoint_series(sigma2_tilde);
    Ok(smooth + endpoint)
}

/// sum_k 1/(k! (k + sigma2)), the exact value of int_0^1 e^y y^(sigma2-1) dy.
fn endpoint_series(sigma2: f64) -> f64 {
    let mut sum = 0.0;
    let mut kfact = 1.0f64;
    for k in 0..60 {
        if k > 0 {
            kfact *= k as f64;
        }
        let term = 1.0 / (kfact * (k as f64 + sigma2));
        sum += term;
        if term < 0.5 * f64::EPSILON * sum {
            break;
        }
    }
    sum
}

/// Derivative of `f_meanfield` in nbar, by the positive-term series
///
///   f'(nbar) = e^-nbar [ 1/sigma2
///            + (sigma2 - 1) sum_{j>=1} nbar^j / ((sigma2+j-1)(sigma2+j) j!) ].
///
/// The j = 0 term is split off so sigma2 = 1 is regular; large nbar runs in
/// the log domain so individual terms never overflow.
pub fn f_derivative(nbar: f64, sigma2_tilde: f64) -> Result<f64> {
    check_f_args(nbar, sigma2_tilde)?;
    let s2 = sigma2_tilde;
    let mut sum = 0.0f64;
    let mut peak = 0.0f64;
    // log of nbar^j / j! * e^-nbar, accumulated incrementally.
    let mut log_term = -nbar;
    let mut j = 0usize;
    loop {
        j += 1;
        let jf = j as f64;
        log_term += (nbar / jf).ln();
        let term = log_term.exp() / ((s2 + jf - 1.0) * (s2 + jf));
        sum += term;
        peak = peak.max(term);
        if (jf > nbar && term < 0.5 * f64::EPSILON * sum.max(1e-300)) || term < 1e-30 * peak.max(f64::MIN_POSITIVE) && jf > nbar {
            break;
        }
        if j > 2_000_000 {
            return Err(Error::NoConvergence(format!("f_derivative({nbar}, {s2}): series did not settle")));
        }
    }
    Ok((-nbar).exp() / s2 + (s2 - 1.0) * sum)
}

fn check_f_args(nbar: f64, sigma2: f64) -> Result<()> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("nbar = {nbar} must be finite and >= 0")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2_tilde = {sigma2} must be > 0")));
    }
    Ok(())
}

/// Golden-section maximization of a unimodal function on [a, b].
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618033988749894848;
    let (mut a, mut b) = (a, b);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

const DEGENERACY_TOL: f64 = 1e-12;

/// How many solutions nbar of f(nbar) = C exist under full channel
/// inversion. For sigma2 >= 1, f climbs monotonically to 1; below 1 it
/// overshoots to a single interior peak C1 and relaxes back to 1, giving
/// the two-solution window C in (1, C1].
pub fn count_solutions_full_inversion(c: f64, sigma2_tilde: f64) -> Result<SolutionCount> {
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be >= 0")));
    }
    if !(sigma2_tilde > 0.0) {
        return Err(Error::InvalidParameter("sigma2_tilde must be > 0".into()));
    }
    let s2 = sigma2_tilde;
    if s2 >= 1.0 {
        let degenerate = (c - 1.0).abs() <= DEGENERACY_TOL;
        let count = if c <= 1.0 { 1 } else { 0 };
        return Ok(SolutionCount { count, c_value: c, c1: None, c1_bounds: None, degenerate });
    }
    // Peak of f lies in (1, (1+s2)/(1-s2)).
    let hi = (1.0 + s2) / (1.0 - s2);
    let (_, c1) = golden_max(|n| f_meanfield(n, s2).unwrap_or(f64::NAN), 1.0, hi, 1e-10 * hi);
    let bounds = ((-1.0f64).exp() / s2, 0.5f64.powf(s2 - 1.0) * (1.0 + 1.0 / s2));
    let bounds = (bounds.0.max(1.0), bounds.1);
    let (count, degenerate) = if (c - 1.0).abs() <= DEGENERACY_TOL {
        (1, true)
    } else if (c - c1).abs() <= DEGENERACY_TOL * c1.max(1.0) {
        (2, true)
    } else if c < 1.0 {
        (1, false)
    } else if c < c1 {
        (2, false)
    } else {
        (0, false)
    };
    Ok(SolutionCount { count, c_value: c, c1: Some(c1), c1_bounds: Some(bounds), degenerate })
}

/// Arrival rate that a stationary mean user count nbar would satisfy:
/// invert nbar to Z = nbar / int_D L^(l-1) dy and evaluate the birth-death
/// balance. Tends to the critical rate as nbar grows.
pub fn lambda_of_nbar(nbar: f64, params: &NetworkParams) -> Result<f64> {
    let profile = DiskProfile::new(params);
    lambda_of_nbar_with_profile(nbar, &profile, params, &QuadratureSpec::default())
}

pub fn lambda_of_nbar_with_profile(
    nbar: f64,
    profile: &DiskProfile,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("nbar = {nbar} must be >= 0")));
    }
    if nbar == 0.0 {
        return Ok(0.0);
    }
    let z = nbar / profile.a_inf;
    let outer = outer_t_integral_with_profile(z, profile, params, spec)?;
    Ok(params.bandwidth_b * params.mu / LN2 * z * outer)
}

const SCAN_POINTS: usize = 400;
const SCAN_LO: f64 = 1e-4;
const SCAN_HI: f64 = 1e4;

fn scan_grid() -> Vec<f64> {
    let ratio = (SCAN_HI / SCAN_LO).ln() / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS).map(|i| SCAN_LO * (ratio * i as f64).exp()).collect()
}

/// Solve the fixed point at arrival rate lambda: all crossings of
/// lambda(nbar) = lambda located on a geometric nbar grid and refined by
/// bracketed root finding. Returns 0, 1, or 2 solutions ordered by nbar.
pub fn solve_fixed_point(lambda: f64, params: &NetworkParams) -> Result<Vec<FoSolution>> {
    params.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 0")));
    }
    let profile = DiskProfile::new(params);
    let spec = QuadratureSpec::default();
    if lambda == 0.0 {
        return Ok(vec![FoSolution {
            z_star: 0.0,
            nbar: 0.0,
            lambda: 0.0,
            branch: Branch::Lower,
            residual: 0.0,
            tangency: false,
        }]);
    }
    let lam = |n: f64| lambda_of_nbar_with_profile(n, &profile, params, &spec);

    let grid = scan_grid();
    let mut prev_n = 0.0f64;
    let mut prev_d = -lambda; // lambda_of_nbar(0) = 0
    let mut roots: Vec<f64> = Vec::new();
    for &n in &grid {
        let d = lam(n)? - lambda;
        if d == 0.0 {
            roots.push(n);
        } else if prev_d.signum() != d.signum() && prev_d != 0.0 {
            // Relative to the bracket scale: the lower root can sit at
            // nbar = O(sigma2) far below the first grid point.
            let tol = 1e-10 * n;
            let r = bracketed_root(|x| lam(x).unwrap_or(f64::NAN) - lambda, prev_n, n, tol)?;
            roots.push(r);
        }
        prev_n = n;
        prev_d = d;
    }
    // Merge near-coincident roots (numerically tangent fold).
    let mut merged: Vec<(f64, bool)> = Vec::new();
    for r in roots {
        match merged.last_mut() {
            Some((last, tang)) if (r - *last).abs() <= 1e-3 * r.max(1e-6) => {
                *last = 0.5 * (*last + r);
                *tang = true;
            }
            _ => merged.push((r, false)),
        }
    }
    if merged.is_empty() {
        if lambda < critical_rate(params) {
            return Err(Error::GridExhausted { nbar_max: SCAN_HI });
        }
        return Ok(Vec::new());
    }
    if merged.len() > 2 {
        return Err(Error::NoConvergence(format!(
            "unexpected fixed-point multiplicity {} at lambda = {lambda}",
            merged.len()
        )));
    }
    let n_sol = merged.len();
    let mut out = Vec::with_capacity(n_sol);
    for (i, (nbar, tangency)) in merged.into_iter().enumerate() {
        let residual = (lam(nbar)? - lambda).abs();
        out.push(FoSolution {
            z_star: nbar / profile.a_inf,
            nbar,
            lambda,
            branch: if i == 0 { Branch::Lower } else { Branch::Upper },
            residual,
            tangency,
        });
    }
    Ok(out)
}

/// Stationary first-order intensity at radius r: Z* L(r)^(l-1), users/m^2.
pub fn intensity_fo(r: f64, solution: &FoSolution, params: &NetworkParams) -> Result<f64> {
    if r < 0.0 || r > params.radius_r {
        return Err(Error::InvalidParameter(format!(
            "intensity_fo: r = {r} outside the cell [0, {}]",
            params.radius_r
        )));
    }
    Ok(solution.z_star * (1.0 + r).powf(params.eta * (1.0 - params.inversion_l)))
}

/// The stability thresholds: the critical rate and, when the lambda(nbar)
/// sweep has an interior peak above it, the upper edge of the two-solution
/// window.
pub fn metastable_window(params: &NetworkParams) -> Result<(f64, Option<f64>)> {
    params.validate()?;
    let lambda_c = critical_rate(params);
    let profile = DiskProfile::new(params);
    let spec = QuadratureSpec::default();
    let grid = scan_grid();
    let mut vals = Vec::with_capacity(grid.len());
    for &n in &grid {
        vals.push(lambda_of_nbar_with_profile(n, &profile, params, &spec)?);
    }
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    if imax == 0 || imax + 1 == grid.len() || vmax <= lambda_c * (1.0 + 1e-9) {
        return Ok((lambda_c, None));
    }
    let (_, peak) = golden_max(
        |n| lambda_of_nbar_with_profile(n, &profile, params, &spec).unwrap_or(f64::NAN),
        grid[imax - 1],
        grid[imax + 1],
        1e-8 * grid[imax + 1],
    );
    Ok((lambda_c, Some(peak)))
}
