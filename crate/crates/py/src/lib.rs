//! Python bindings: the network parameter set plus the main solver and
//! simulator entry points, returning plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sbd_core::model::{NetworkParams, RateMode};
use sbd_core::passage::CumMethod;
use sbd_core::second_order::{conditional_intensity, solve_so, RadialGrid, SoOptions};
use sbd_core::sim::{rate_conservation_check, SimMode, SimOptions};

fn err(e: sbd_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "NetworkParams")]
#[derive(Clone)]
struct PyNetworkParams {
    inner: NetworkParams,
}

#[pymethods]
impl PyNetworkParams {
    #[new]
    #[pyo3(signature = (
        lambda_per_m2_s = 0.3,
        mu_per_bit = 0.01,
        bandwidth_hz = 1e6,
        sigma2_tilde = 1e-8,
        inversion_l = 0.0,
        eta = 4.0,
        radius_m = 100.0,
        rate_mode = "low_sinr",
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        lambda_per_m2_s: f64,
        mu_per_bit: f64,
        bandwidth_hz: f64,
        sigma2_tilde: f64,
        inversion_l: f64,
        eta: f64,
        radius_m: f64,
        rate_mode: &str,
    ) -> PyResult<Self> {
        let mode = match rate_mode {
            "low_sinr" => RateMode::LowSinr,
            "general" => RateMode::General,
            other => {
                return Err(PyValueError::new_err(format!(
                    "rate_mode '{other}' (expected 'low_sinr' or 'general')"
                )))
            }
        };
        let inner = NetworkParams {
            lambda: lambda_per_m2_s,
            mu: mu_per_bit,
            bandwidth_b: bandwidth_hz,
            sigma2_tilde,
            inversion_l,
            eta,
            radius_r: radius_m,
            rate_mode: mode,
        };
        inner.validate().map_err(err)?;
        Ok(PyNetworkParams { inner })
    }

    #[getter]
    fn lambda_per_m2_s(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn mu_per_bit(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn bandwidth_hz(&self) -> f64 {
        self.inner.bandwidth_b
    }

    #[getter]
    fn sigma2_tilde(&self) -> f64 {
        self.inner.sigma2_tilde
    }

    #[getter]
    fn inversion_l(&self) -> f64 {
        self.inner.inversion_l
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn radius_m(&self) -> f64 {
        self.inner.radius_r
    }

    #[getter]
    fn rate_mode(&self) -> &'static str {
        match self.inner.rate_mode {
            RateMode::LowSinr => "low_sinr",
            RateMode::General => "general",
        }
    }

    fn area_m2(&self) -> f64 {
        self.inner.area()
    }

    fn with_lambda(&self, lambda_per_m2_s: f64) -> Self {
        let mut inner = self.inner;
        inner.lambda = lambda_per_m2_s;
        PyNetworkParams { inner }
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkParams(lambda_per_m2_s={}, eta={}, inversion_l={}, sigma2_tilde={})",
            self.inner.lambda, self.inner.eta, self.inner.inversion_l, self.inner.sigma2_tilde
        )
    }
}

#[pyfunction]
fn critical_rate(params: &PyNetworkParams) -> f64 {
    sbd_core::model::critical_rate(&params.inner)
}

#[pyfunction]
fn classify_regime<'py>(py: Python<'py>, params: &PyNetworkParams) -> PyResult<Bound<'py, PyDict>> {
    let rep = sbd_core::model::classify_regime(&params.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("regime", format!("{:?}", rep.regime).to_lowercase())?;
    d.set_item("at_boundary", rep.at_boundary)?;
    d.set_item("lambda_c_per_m2_s", rep.lambda_c)?;
    d.set_item("lambda_upper_per_m2_s", rep.lambda_upper)?;
    Ok(d)
}

#[pyfunction]
fn path_loss(r_m: f64, eta: f64) -> PyResult<f64> {
    sbd_core::model::path_loss(r_m, eta).map_err(err)
}

#[pyfunction]
fn effective_gain(r_m: f64, params: &PyNetworkParams) -> PyResult<f64> {
    sbd_core::model::effective_gain(r_m, &params.inner).map_err(err)
}

#[pyfunction]
fn rate_bits_s(gain_self: f64, interference_sum: f64, params: &PyNetworkParams) -> f64 {
    sbd_core::model::rate(gain_self, interference_sum, &params.inner)
}

#[pyfunction]
fn f_meanfield(nbar: f64, sigma2_tilde: f64) -> PyResult<f64> {
    sbd_core::first_order::f_meanfield(nbar, sigma2_tilde).map_err(err)
}

#[pyfunction]
fn f_derivative(nbar: f64, sigma2_tilde: f64) -> PyResult<f64> {
    sbd_core::first_order::f_derivative(nbar, sigma2_tilde).map_err(err)
}

#[pyfunction]
fn count_solutions_full_inversion<'py>(
    py: Python<'py>,
    c: f64,
    sigma2_tilde: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = sbd_core::first_order::count_solutions_full_inversion(c, sigma2_tilde).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("count", sc.count)?;
    d.set_item("c_value", sc.c_value)?;
    d.set_item("c1", sc.c1)?;
    d.set_item("c1_bounds", sc.c1_bounds)?;
    d.set_item("degenerate", sc.degenerate)?;
    Ok(d)
}

#[pyfunction]
fn lambda_of_nbar(nbar: f64, params: &PyNetworkParams) -> PyResult<f64> {
    sbd_core::first_order::lambda_of_nbar(nbar, &params.inner).map_err(err)
}

#[pyfunction]
fn solve_fixed_point<'py>(
    py: Python<'py>,
    lambda_per_m2_s: f64,
    params: &PyNetworkParams,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let sols =
        sbd_core::first_order::solve_fixed_point(lambda_per_m2_s, &params.inner).map_err(err)?;
    sols.iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("nbar_users", s.nbar)?;
            d.set_item("z_star_per_m2", s.z_star)?;
            d.set_item("branch", format!("{:?}", s.branch).to_lowercase())?;
            d.set_item("residual_per_m2_s", s.residual)?;
            d.set_item("tangency", s.tangency)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
fn metastable_window(params: &PyNetworkParams) -> PyResult<(f64, Option<f64>)> {
    sbd_core::first_order::metastable_window(&params.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (lambda_per_m2_s, params, n_r = 32, n_theta = 16))]
fn solve_second_order<'py>(
    py: Python<'py>,
    lambda_per_m2_s: f64,
    params: &PyNetworkParams,
    n_r: usize,
    n_theta: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = RadialGrid::new(n_r, n_theta, params.inner.radius_r).map_err(err)?;
    let (g1, g2, diag) = solve_so(
        lambda_per_m2_s,
        &params.inner,
        &grid,
        Default::default(),
        &SoOptions::default(),
    )
    .map_err(err)?;
    let origin = conditional_intensity(&g1, &g2, 0.0).map_err(err)?;
    let edge = conditional_intensity(&g1, &g2, 0.99 * params.inner.radius_r).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r_m", grid.centers.clone())?;
    d.set_item("gamma1_users_per_m2", g1.values.clone())?;
    d.set_item("nbar_users", g1.nbar())?;
    d.set_item("cond_origin_users_per_m2", origin)?;
    d.set_item("cond_edge_users_per_m2", edge)?;
    d.set_item("outer_iterations", diag.outer_iterations)?;
    d.set_item("nbar_fo_users", diag.nbar_fo)?;
    Ok(d)
}

fn parse_mode(mode: &str) -> PyResult<SimMode> {
    match mode {
        "exact_event" => Ok(SimMode::ExactEvent),
        "discrete_step" => Ok(SimMode::DiscreteStep),
        other => Err(PyValueError::new_err(format!(
            "mode '{other}' (expected 'exact_event' or 'discrete_step')"
        ))),
    }
}

#[pyfunction]
#[pyo3(signature = (
    params,
    horizon = 1_000_000,
    seed = 0,
    mode = "exact_event",
    n_bands = 1,
    warmup_fraction = 0.2,
    snapshot_cadence = 1000,
    divergence_threshold = None,
    n_annuli = 16,
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyNetworkParams,
    horizon: u64,
    seed: u64,
    mode: &str,
    n_bands: usize,
    warmup_fraction: f64,
    snapshot_cadence: u64,
    divergence_threshold: Option<u64>,
    n_annuli: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = SimOptions {
        mode: parse_mode(mode)?,
        horizon,
        n_bands,
        seed,
        warmup_fraction,
        divergence_threshold,
        snapshot_cadence,
        hit_targets: Vec::new(),
        stop_when_hit: false,
        n_annuli,
    };
    let trace = if n_bands > 1 {
        sbd_core::sim::multi_band_run(&params.inner, &opts).map_err(err)?
    } else {
        sbd_core::sim::run(&params.inner, &opts).map_err(err)?
    };
    let conservation = rate_conservation_check(&trace, &params.inner)
        .ok()
        .map(|c| c.aggregate_rel_error);
    let d = PyDict::new(py);
    d.set_item("nbar_users", trace.nbar)?;
    d.set_item("events", trace.events)?;
    d.set_item("elapsed_s", trace.elapsed_s)?;
    d.set_item("diverged", trace.diverged)?;
    d.set_item("trace_t_s", trace.trace_t.clone())?;
    d.set_item("trace_n_users", trace.trace_n.clone())?;
    d.set_item("intensity_r_m", trace.intensity_r.clone())?;
    d.set_item("intensity_users_per_m2", trace.intensity.clone())?;
    d.set_item("cond_origin_users_per_m2", trace.cond_intensity_origin.clone())?;
    d.set_item("cond_edge_users_per_m2", trace.cond_intensity_edge.clone())?;
    d.set_item("conservation_rel_error", conservation)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (params, n_target, horizon = 10_000_000, seed = 0))]
fn hitting_time(
    params: &PyNetworkParams,
    n_target: u64,
    horizon: u64,
    seed: u64,
) -> PyResult<Option<f64>> {
    let opts = SimOptions {
        horizon,
        seed,
        warmup_fraction: 0.0,
        ..Default::default()
    };
    sbd_core::sim::hitting_time(&params.inner, n_target, &opts).map_err(err)
}

#[pyfunction]
fn departure_rate(n: u64, sigma2_tilde: f64) -> f64 {
    sbd_core::passage::departure_rate(n, sigma2_tilde)
}

#[pyfunction]
fn drift_bound(epsilon: f64, sigma2_tilde: f64) -> PyResult<Option<u64>> {
    sbd_core::passage::drift_bound(epsilon, sigma2_tilde).map_err(err)
}

#[pyfunction]
fn tau_step(n: u64, epsilon: f64, sigma2_tilde: f64) -> PyResult<f64> {
    sbd_core::passage::tau_step_closed(n, epsilon, sigma2_tilde).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, epsilon, sigma2_tilde, method = "closed"))]
fn tau_cum(n: u64, epsilon: f64, sigma2_tilde: f64, method: &str) -> PyResult<f64> {
    let m = match method {
        "closed" => CumMethod::Closed,
        "recursion" => CumMethod::Recursion,
        other => {
            return Err(PyValueError::new_err(format!(
                "method '{other}' (expected 'closed' or 'recursion')"
            )))
        }
    };
    sbd_core::passage::tau_cum(n, epsilon, sigma2_tilde, m).map_err(err)
}

#[pyfunction]
fn tau_sigma_sweep<'py>(
    py: Python<'py>,
    n: u64,
    epsilon: f64,
    sigma2_grid: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let sw = sbd_core::passage::tau_sigma_sweep(n, epsilon, &sigma2_grid).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("inv_sigma2", sw.rows.iter().map(|r| r.0).collect::<Vec<_>>())?;
    d.set_item("tau_cum_chain_units", sw.rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
    d.set_item("fit_slope", sw.fit_slope)?;
    d.set_item("fit_intercept", sw.fit_intercept)?;
    d.set_item("r_squared", sw.r_squared)?;
    Ok(d)
}

#[pymodule]
fn sbd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkParams>()?;
    m.add_function(wrap_pyfunction!(critical_rate, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(effective_gain, m)?)?;
    m.add_function(wrap_pyfunction!(rate_bits_s, m)?)?;
    m.add_function(wrap_pyfunction!(f_meanfield, m)?)?;
    m.add_function(wrap_pyfunction!(f_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(count_solutions_full_inversion, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_of_nbar, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(metastable_window, m)?)?;
    m.add_function(wrap_pyfunction!(solve_second_order, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_time, m)?)?;
    m.add_function(wrap_pyfunction!(departure_rate, m)?)?;
    m.add_function(wrap_pyfunction!(drift_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tau_step, m)?)?;
    m.add_function(wrap_pyfunction!(tau_cum, m)?)?;
    m.add_function(wrap_pyfunction!(tau_sigma_sweep, m)?)?;
    Ok(())
}
