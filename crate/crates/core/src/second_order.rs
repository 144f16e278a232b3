//! Second-moment closure of the stationary regime: coupled fixed points for
//! the intensity gamma1(r) and the pair density gamma2(r1, r2, dtheta) on a
//! radial grid, with the third moment factorized as a convex combination of
//! lower-moment products.

use serde::{Deserialize, Serialize};

use crate::first_order::{intensity_fo, solve_fixed_point, FoSolution};
use crate::model::{critical_rate, NetworkParams, LN2};
use crate::numerics::{laplace_exponent_integral, QuadratureSpec};
use crate::{Error, Result};

/// Annular discretization of the disk with an angular grid for pair
/// separations. Radial symmetry of the stationary law reduces the pair
/// state to (r1, r2, dtheta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub n_r: usize,
    pub n_theta: usize,
    pub radius: f64,
    /// Annulus edges, length n_r + 1.
    pub edges: Vec<f64>,
    /// Annulus mid radii.
    pub centers: Vec<f64>,
    /// Annulus areas; sum to pi R^2.
    pub areas: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n_r: usize, n_theta: usize, radius: f64) -> Result<Self> {
        if n_r < 16 || n_theta < 8 {
            return Err(Error::InvalidParameter(format!(
                "RadialGrid: need n_r >= 16 and n_theta >= 8 (got {n_r}, {n_theta})"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("RadialGrid: radius must be > 0".into()));
        }
        let edges: Vec<f64> = (0..=n_r).map(|i| radius * i as f64 / n_r as f64).collect();
        let centers: Vec<f64> = (0..n_r).map(|i| 0.5 * (edges[i] + edges[i + 1])).collect();
        let areas: Vec<f64> = (0..n_r)
            .map(|i| std::f64::consts::PI * (edges[i + 1] * edges[i + 1] - edges[i] * edges[i]))
            .collect();
        Ok(RadialGrid { n_r, n_theta, radius, edges, centers, areas })
    }

    /// Annulus index containing radius r.
    pub fn annulus_of(&self, r: f64) -> usize {
        let i = (r / self.radius * self.n_r as f64) as usize;
        i.min(self.n_r - 1)
    }
}

/// First moment: users/m^2 per annulus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityField {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl IntensityField {
    /// Total mass int gamma1 = mean user count.
    pub fn nbar(&self) -> f64 {
        self.values.iter().zip(&self.grid.areas).map(|(v, a)| v * a).sum()
    }
}

/// Convex-combination weights over the four third-moment factorizations
/// {g2(x,y)g1(u), g2(x,u)g1(y), g2(y,u)g1(x), g2(y,u)g2(x,u)/g1(u)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorWeights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for FactorWeights {
    fn default() -> Self {
        // Calibrated against exact-event simulation at eta = 4,
        // lambda = 0.425: mixing mass on the decoupling term keeps the
        // observer dependence of the cross terms while pulling nbar onto
        // the simulated value.
        FactorWeights { a: 0.4, b: 0.3, c: 0.3, d: 0.0 }
    }
}

impl FactorWeights {
    pub fn validate(&self) -> Result<()> {
        let s = self.a + self.b + self.c + self.d;
        if self.a < 0.0 || self.b < 0.0 || self.c < 0.0 || self.d < 0.0 || (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "factorization weights must be a convex combination (got sum {s})"
            )));
        }
        Ok(())
    }
}

/// Second moment measure on (r1, r2, dtheta), users^2/m^4.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondMoment {
    pub grid: RadialGrid,
    pub weights: FactorWeights,
    /// Flat array indexed by ((i * n_r) + j) * n_theta + k.
    pub values: Vec<f64>,
}

impl SecondMoment {
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.grid.n_r + j) * self.grid.n_theta + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.idx(i, j, k)]
    }
}

/// Angular machinery shared by the sweeps: a uniform azimuth grid for the
/// third point u (2 n_theta points) and its fold into dtheta bins relative
/// to x (at angle 0) and to y (at angle theta_k).
struct AngleTables {
    n_phi: usize,
    /// dtheta bin of u's azimuth relative to x.
    bin_x: Vec<usize>,
    /// bin_y[k][p]: dtheta bin of u's azimuth relative to y at theta_k.
    bin_y: Vec<Vec<usize>>,
}

impl AngleTables {
    fn new(n_theta: usize) -> Self {
        let n_phi = 2 * n_theta;
        let bin_width = std::f64::consts::PI / n_theta as f64;
        let fold_bin = |a: f64| -> usize {
            let two_pi = 2.0 * std::f64::consts::PI;
            let folded = ((a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI).abs();
            ((folded / bin_width) as usize).min(n_theta - 1)
        };
        let phi: Vec<f64> =
            (0..n_phi).map(|p| (p as f64 + 0.5) * 2.0 * std::f64::consts::PI / n_phi as f64).collect();
        let bin_x: Vec<usize> = phi.iter().map(|&a| fold_bin(a)).collect();
        let bin_y: Vec<Vec<usize>> = (0..n_theta)
            .map(|k| {
                let tk = (k as f64 + 0.5) * bin_width;
                phi.iter().map(|&a| fold_bin(a - tk)).collect()
            })
            .collect();
        AngleTables { n_phi, bin_x, bin_y }
    }
}

fn gains(grid: &RadialGrid, params: &NetworkParams) -> Vec<f64> {
    let em = params.eta * (1.0 - params.inversion_l);
    grid.centers.iter().map(|&r| (1.0 + r).powf(-em)).collect()
}

/// PPP initialization from a first-order solution: gamma1 is the FO
/// intensity and gamma2 its product form.
pub fn init_from_fo(
    solution: &FoSolution,
    grid: &RadialGrid,
    params: &NetworkParams,
    weights: FactorWeights,
) -> Result<(IntensityField, SecondMoment)> {
    weights.validate()?;
    let g1: Vec<f64> = grid
        .centers
        .iter()
        .map(|&r| intensity_fo(r, solution, params))
        .collect::<Result<_>>()?;
    let n_r = grid.n_r;
    let n_theta = grid.n_theta;
    let mut g2 = vec![0.0; n_r * n_r * n_theta];
    for i in 0..n_r {
        for j in 0..n_r {
            for k in 0..n_theta {
                g2[(i * n_r + j) * n_theta + k] = g1[i] * g1[j];
            }
        }
    }
    Ok((
        IntensityField { grid: grid.clone(), values: g1 },
        SecondMoment { grid: grid.clone(), weights, values: g2 },
    ))
}

/// Mean interference seen by the pair (x, y) = (annulus i, annulus j,
/// separation bin k): the u-integral of L(u)^(1-l) weighted by the closed
/// third moment over gamma2(x, y).
pub fn mean_interference_pair(
    i: usize,
    j: usize,
    k: usize,
    g1: &IntensityField,
    g2: &SecondMoment,
    weights: FactorWeights,
    params: &NetworkParams,
) -> Result<f64> {
    weights.validate()?;
    let grid = &g1.grid;
    if i >= grid.n_r || j >= grid.n_r || k >= grid.n_theta {
        return Err(Error::InvalidParameter("mean_interference_pair: index out of range".into()));
    }
    let g2ijk = g2.get(i, j, k);
    if !(g2ijk > 0.0) {
        return Err(Error::InvalidParameter("mean_interference_pair: gamma2(i,j,k) must be > 0".into()));
    }
    let lp = gains(grid, params);
    let angles = AngleTables::new(grid.n_theta);
    let mut num = 0.0;
    for m in 0..grid.n_r {
        let wu = grid.areas[m] / angles.n_phi as f64;
        for p in 0..angles.n_phi {
            let g2_xu = g2.get(i, m, angles.bin_x[p]);
            let g2_yu = g2.get(j, m, angles.bin_y[k][p]);
            let mut gamma3 = weights.a * g2ijk * g1.values[m]
                + weights.b * g2_xu * g1.values[j]
                + weights.c * g2_yu * g1.values[i];
            if weights.d != 0.0 {
                if g1.values[m] == 0.0 {
                    log::warn!("mean_interference_pair: gamma1(u) = 0 at annulus {m}; dropping factorization-d term");
                } else {
                    gamma3 += weights.d * g2_yu * g2_xu / g1.values[m];
                }
            }
            num += wu * lp[m] * gamma3;
        }
    }
    Ok(num / g2ijk)
}

/// All pair interferences at once (the inner loop of `update_gamma2`).
fn compute_j_all(
    g1: &[f64],
    g2: &SecondMoment,
    weights: FactorWeights,
    lp: &[f64],
    angles: &AngleTables,
) -> Vec<f64> {
    let grid = &g2.grid;
    let (n_r, n_theta, n_phi) = (grid.n_r, grid.n_theta, angles.n_phi);
    let inv_phi = 1.0 / n_phi as f64;

    // Factorization (a): u decouples entirely.
    let base_a: f64 = (0..n_r).map(|m| grid.areas[m] * lp[m] * g1[m]).sum();

    // gx[i][m] = azimuthal mean of gamma2(x_i, u at annulus m).
    let mut gx = vec![0.0; n_r * n_r];
    for i in 0..n_r {
        for m in 0..n_r {
            let mut s = 0.0;
            for p in 0..n_phi {
                s += g2.get(i, m, angles.bin_x[p]);
            }
            gx[i * n_r + m] = s * inv_phi;
        }
    }
    // gx_sum[i] = int_u L(u)^(1-l) <gamma2(x_i, u)>.
    let gx_sum: Vec<f64> = (0..n_r)
        .map(|i| (0..n_r).map(|m| grid.areas[m] * lp[m] * gx[i * n_r + m]).sum())
        .collect();

    // gy[k][j][m]: same for y offset by theta_k.
    let mut gy_sum = vec![0.0; n_theta * n_r];
    let mut gy = vec![0.0; n_r * n_r];
    let need_d = weights.d != 0.0;
    let mut out = vec![0.0; n_r * n_r * n_theta];
    for k in 0..n_theta {
        for j in 0..n_r {
            for m in 0..n_r {
                let mut s = 0.0;
                for p in 0..n_phi {
                    s += g2.get(j, m, angles.bin_y[k][p]);
                }
                gy[j * n_r + m] = s * inv_phi;
            }
            gy_sum[k * n_r + j] =
                (0..n_r).map(|m| grid.areas[m] * lp[m] * gy[j * n_r + m]).sum();
        }
        for i in 0..n_r {
            for j in 0..n_r {
                let g2ijk = g2.get(i, j, k);
                let mut num = weights.a * g2ijk * base_a
                    + weights.b * g1[j] * gx_sum[i]
                    + weights.c * g1[i] * gy_sum[k * n_r + j];
                if need_d {
                    let mut s = 0.0;
                    for m in 0..n_r {
                        if g1[m] == 0.0 {
                            continue;
                        }
                        let wu = grid.areas[m] * inv_phi * lp[m] / g1[m];
                        let mut acc = 0.0;
                        for p in 0..n_phi {
                            acc += g2.get(j, m, angles.bin_y[k][p]) * g2.get(i, m, angles.bin_x[p]);
                        }
                        s += wu * acc;
                    }
                    num += weights.d * s;
                }
                out[(i * n_r + j) * n_theta + k] = num / g2ijk;
            }
        }
    }
    out
}

/// One explicit sweep of the pair equation: gamma2 recomputed pointwise from
/// the pair birth-death balance with the current mean interference, then
/// symmetrized.
pub fn update_gamma2(
    g1: &IntensityField,
    g2: &SecondMoment,
    weights: FactorWeights,
    params: &NetworkParams,
) -> Result<SecondMoment> {
    weights.validate()?;
    let grid = &g2.grid;
    let (n_r, n_theta) = (grid.n_r, grid.n_theta);
    let kappa = params.rho() * LN2 / params.bandwidth_b;
    let lp = gains(grid, params);
    let angles = AngleTables::new(n_theta);
    let s2 = params.sigma2_tilde;
    let j_all = compute_j_all(&g1.values, g2, weights, &lp, &angles);
    let mut values = vec![0.0; n_r * n_r * n_theta];
    for i in 0..n_r {
        for j in 0..n_r {
            for k in 0..n_theta {
                let idx = (i * n_r + j) * n_theta + k;
                let jv = j_all[idx];
                let denom = lp[i] / (jv + lp[j] + s2) + lp[j] / (jv + lp[i] + s2);
                values[idx] = kappa * (g1.values[i] + g1.values[j]) / denom;
            }
        }
    }
    // Exact symmetrization.
    for i in 0..n_r {
        for j in (i + 1)..n_r {
            for k in 0..n_theta {
                let a = values[(i * n_r + j) * n_theta + k];
                let b = values[(j * n_r + i) * n_theta + k];
                let m = 0.5 * (a + b);
                values[(i * n_r + j) * n_theta + k] = m;
                values[(j * n_r + i) * n_theta + k] = m;
            }
        }
    }
    for v in &values {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Divergence("update_gamma2 produced NaN or negative pair mass".into()));
        }
    }
    Ok(SecondMoment { grid: grid.clone(), weights, values })
}

/// One sweep of the intensity equation: per annulus, solve the scalar
/// balance for gamma1(x) by damped iteration, with the interference field
/// conditioned on a user at x through gamma2(., x)/gamma1(x).
pub fn update_gamma1(
    g1: &IntensityField,
    g2: &SecondMoment,
    params: &NetworkParams,
    alpha: f64,
) -> Result<IntensityField> {
    let grid = &g1.grid;
    let (n_r, n_theta) = (grid.n_r, grid.n_theta);
    let kappa = params.rho() * LN2 / params.bandwidth_b;
    let lp = gains(grid, params);
    let s2 = params.sigma2_tilde;
    let spec = QuadratureSpec::default();
    let mut out = g1.values.clone();
    for i in 0..n_r {
        if !(out[i] > 0.0) {
            return Err(Error::NoConvergence(format!(
                "update_gamma1: gamma1 not strictly positive at annulus {i}"
            )));
        }
        let mut gi = out[i];
        let mut alpha_i = alpha;
        let mut prev_delta = 0.0f64;
        let mut converged = false;
        for _ in 0..200 {
            let masses: Vec<(f64, f64)> = (0..n_r)
                .map(|j| {
                    let mut h = 0.0;
                    for k in 0..n_theta {
                        h += g2.get(j, i, k);
                    }
                    (lp[j], grid.areas[j] * h / (n_theta as f64 * gi))
                })
                .collect();
            let outer = laplace_exponent_integral(s2, &masses, &spec)?;
            let target = kappa / (lp[i] * outer);
            let gnew = (1.0 - alpha_i) * gi + alpha_i * target;
            let delta = gnew - gi;
            if delta * prev_delta < 0.0 {
                alpha_i *= 0.5;
            }
            prev_delta = delta;
            let done = delta.abs() <= 1e-10 * gi.abs() + 1e-30;
            gi = gnew;
            if done {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "update_gamma1: damped iteration stalled at annulus {i}"
            )));
        }
        out[i] = gi;
    }
    Ok(IntensityField { grid: grid.clone(), values: out })
}

#[derive(Debug, Clone)]
pub struct SoOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub alpha: f64,
    /// Permit lambda >= lambda_c (no stationary regime; iteration may
    /// diverge, which is then reported as such).
    pub allow_unstable: bool,
}

impl Default for SoOptions {
    fn default() -> Self {
        SoOptions {
            tol: 1e-5,
            max_outer: 200,
            inner_tol: 1e-6,
            max_inner: 100,
            alpha: 0.5,
            allow_unstable: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SoDiagnostics {
    pub outer_iterations: usize,
    /// Joint sup-norm relative change per outer iteration.
    pub residual_history: Vec<f64>,
    pub nbar_history: Vec<f64>,
    pub nbar_fo: f64,
}

/// Alternate pair and intensity sweeps from the PPP initialization until the
/// joint sup-norm relative change falls below `opts.tol`.
pub fn solve_so(
    lambda: f64,
    params: &NetworkParams,
    grid: &RadialGrid,
    weights: FactorWeights,
    opts: &SoOptions,
) -> Result<(IntensityField, SecondMoment, SoDiagnostics)> {
    params.validate()?;
    weights.validate()?;
    let mut params = *params;
    params.lambda = lambda;
    if lambda >= critical_rate(&params) && !opts.allow_unstable {
        return Err(Error::Unsupported(format!(
            "solve_so: lambda = {lambda} >= lambda_c = {}; no stationary regime (set allow_unstable to force)",
            critical_rate(&params)
        )));
    }
    if lambda == 0.0 {
        let g1 = IntensityField { grid: grid.clone(), values: vec![0.0; grid.n_r] };
        let g2 = SecondMoment {
            grid: grid.clone(),
            weights,
            values: vec![0.0; grid.n_r * grid.n_r * grid.n_theta],
        };
        let diag = SoDiagnostics {
            outer_iterations: 1,
            residual_history: vec![0.0],
            nbar_history: vec![0.0],
            nbar_fo: 0.0,
        };
        return Ok((g1, g2, diag));
    }
    let fo = solve_fixed_point(lambda, &params)?;
    let fo_lower = fo
        .first()
        .ok_or_else(|| Error::NoConvergence("solve_so: no first-order solution to initialize from".into()))?;
    let (mut g1, mut g2) = init_from_fo(fo_lower, grid, &params, weights)?;
    let mut diag = SoDiagnostics { nbar_fo: fo_lower.nbar, ..Default::default() };
    let mut growth_streak = 0usize;
    for outer in 0..opts.max_outer {
        for _ in 0..opts.max_inner {
            let g2n = update_gamma2(&g1, &g2, weights, &params)?;
            let ch = sup_rel_change(&g2.values, &g2n.values);
            g2 = g2n;
            if ch < opts.inner_tol {
                break;
            }
        }
        let g1n = update_gamma1(&g1, &g2, &params, opts.alpha)?;
        let ch1 = sup_rel_change(&g1.values, &g1n.values);
        g1 = g1n;
        diag.residual_history.push(ch1);
        diag.nbar_history.push(g1.nbar());
        diag.outer_iterations = outer + 1;
        if ch1 < opts.tol {
            return Ok((g1, g2, diag));
        }
        if outer > 0 && ch1 > diag.residual_history[outer - 1] {
            growth_streak += 1;
            if growth_streak >= 10 {
                return Err(Error::Divergence(format!(
                    "solve_so: residual grew for 10 consecutive outer iterations; history {:?}, nbar {:?}",
                    diag.residual_history, diag.nbar_history
                )));
            }
        } else {
            growth_streak = 0;
        }
    }
    Err(Error::NoConvergence(format!(
        "solve_so: no convergence in {} outer iterations (last residual {:e})",
        opts.max_outer,
        diag.residual_history.last().copied().unwrap_or(f64::NAN)
    )))
}

fn sup_rel_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(o, n)| (n - o).abs() / (o.abs() + 1e-300))
        .fold(0.0, f64::max)
}

/// Radial intensity profile seen by an observer at `observer_r`: the
/// azimuthal average of gamma2(observer, .)/gamma1(observer) per annulus.
pub fn conditional_intensity(
    g1: &IntensityField,
    g2: &SecondMoment,
    observer_r: f64,
) -> Result<Vec<f64>> {
    let grid = &g1.grid;
    if observer_r < 0.0 || observer_r > grid.radius {
        return Err(Error::InvalidParameter(format!(
            "conditional_intensity: observer_r = {observer_r} outside [0, {}]",
            grid.radius
        )));
    }
    let i = grid.annulus_of(observer_r);
    if !(g1.values[i] > 0.0) {
        return Err(Error::InvalidParameter("conditional_intensity: gamma1(observer) must be > 0".into()));
    }
    let mut profile = Vec::with_capacity(grid.n_r);
    for j in 0..grid.n_r {
        let mut s = 0.0;
        for k in 0..grid.n_theta {
            s += g2.get(i, j, k);
        }
        profile.push(s / (grid.n_theta as f64 * g1.values[i]));
    }
    Ok(profile)
}
