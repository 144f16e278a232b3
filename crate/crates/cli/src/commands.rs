//! The seven subcommands. Every command resolves its own subdirectory of
//! the output root, writes CSV/JSON artifacts there, and leaves a manifest
//! with checksums behind.

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sbd_core::config::ExperimentConfig;
use sbd_core::first_order::{
    lambda_of_nbar_with_profile, metastable_window, solve_fixed_point, FoSolution,
};
use sbd_core::model::{classify_regime, critical_rate, NetworkParams};
use sbd_core::numerics::{DiskProfile, QuadratureSpec};
use sbd_core::passage::{tau_sigma_sweep, PassageTable};
use sbd_core::second_order::{conditional_intensity, solve_so, RadialGrid, SoOptions};
use sbd_core::sim::{rate_conservation_check, run, TraceSummary};

use crate::output::OutDir;

fn begin(cfg: &ExperimentConfig, out_root: &std::path::Path, sub: &str, seeds: Vec<u64>) -> Result<OutDir> {
    let toml = cfg.to_toml().map_err(|e| anyhow!("{e}"))?;
    OutDir::begin(out_root.join(sub), &toml, seeds)
}

fn params(cfg: &ExperimentConfig) -> Result<NetworkParams> {
    cfg.network.to_params().map_err(|e| anyhow!("config: {e}"))
}

pub fn cmd_critical(cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let p = params(cfg)?;
    let report = classify_regime(&p).map_err(|e| anyhow!("{e}"))?;
    let mut out = begin(cfg, out_root, "critical", vec![])?;
    #[derive(Serialize)]
    struct CriticalReport {
        lambda_per_m2_s: f64,
        lambda_c_per_m2_s: f64,
        regime: String,
        at_boundary: bool,
        lambda_upper_per_m2_s: Option<f64>,
    }
    let rep = CriticalReport {
        lambda_per_m2_s: p.lambda,
        lambda_c_per_m2_s: report.lambda_c,
        regime: format!("{:?}", report.regime),
        at_boundary: report.at_boundary,
        lambda_upper_per_m2_s: report.lambda_upper,
    };
    out.json("critical.json", &rep)?;
    println!("lambda          {:>12.6} users/m^2/s", p.lambda);
    println!("lambda_c        {:>12.6} users/m^2/s", report.lambda_c);
    match report.lambda_upper {
        Some(u) => println!("window upper    {u:>12.6} users/m^2/s"),
        None => println!("window upper    {:>12}", "-"),
    }
    println!("regime          {:>12}", rep.regime);
    out.finish()
}

pub fn cmd_sweep_fo(cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let p = params(cfg)?;
    let mut out = begin(cfg, out_root, "sweep-fo", vec![])?;
    let rows = sweep_rows(&p, cfg.sweep.nbar_min, cfg.sweep.nbar_max, cfg.sweep.points);
    out.csv("sweep_fo.csv", "nbar_users,lambda_per_m2_s", rows)?;
    let (lambda_c, upper) = metastable_window(&p).map_err(|e| anyhow!("{e}"))?;
    #[derive(Serialize)]
    struct SweepSummary {
        lambda_c_per_m2_s: f64,
        lambda_upper_per_m2_s: Option<f64>,
        points: usize,
    }
    out.json(
        "sweep_fo.json",
        &SweepSummary { lambda_c_per_m2_s: lambda_c, lambda_upper_per_m2_s: upper, points: cfg.sweep.points },
    )?;
    out.finish()
}

/// (nbar, lambda) rows on a geometric grid; failed points are logged and
/// skipped so one bad quadrature does not kill the sweep.
fn sweep_rows(p: &NetworkParams, lo: f64, hi: f64, points: usize) -> Vec<String> {
    let profile = DiskProfile::new(p);
    let spec = QuadratureSpec::default();
    (0..points)
        .filter_map(|i| {
            let f = if points > 1 { i as f64 / (points - 1) as f64 } else { 0.0 };
            let nbar = lo * (hi / lo).powf(f);
            match lambda_of_nbar_with_profile(nbar, &profile, p, &spec) {
                Ok(lam) => Some(format!("{nbar:.8e},{lam:.8e}")),
                Err(e) => {
                    log::warn!("sweep point nbar = {nbar:.3e} failed: {e}");
                    None
                }
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SolutionRow {
    nbar_users: f64,
    z_star_per_m2: f64,
    branch: String,
    residual_per_m2_s: f64,
    tangency: bool,
}

fn solution_rows(sols: &[FoSolution]) -> Vec<SolutionRow> {
    sols.iter()
        .map(|s| SolutionRow {
            nbar_users: s.nbar,
            z_star_per_m2: s.z_star,
            branch: format!("{:?}", s.branch),
            residual_per_m2_s: s.residual,
            tangency: s.tangency,
        })
        .collect()
}

pub fn cmd_solve_fo(cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let p = params(cfg)?;
    let sols = solve_fixed_point(p.lambda, &p).map_err(|e| anyhow!("{e}"))?;
    let mut out = begin(cfg, out_root, "solve-fo", vec![])?;
    #[derive(Serialize)]
    struct SolveFoReport {
        lambda_per_m2_s: f64,
        lambda_c_per_m2_s: f64,
        solutions: Vec<SolutionRow>,
    }
    out.json(
        "solve_fo.json",
        &SolveFoReport {
            lambda_per_m2_s: p.lambda,
            lambda_c_per_m2_s: critical_rate(&p),
            solutions: solution_rows(&sols),
        },
    )?;
    for s in &sols {
        println!("{:?} branch: nbar = {:.6}", s.branch, s.nbar);
    }
    if sols.is_empty() {
        println!("no stationary solution at lambda = {}", p.lambda);
    }
    out.finish()
}

pub fn cmd_solve_so(cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let p = params(cfg)?;
    let grid = RadialGrid::new(cfg.solver.n_r, cfg.solver.n_theta, p.radius_r)
        .map_err(|e| anyhow!("{e}"))?;
    let weights = cfg.solver.weights();
    let opts = SoOptions {
        tol: cfg.solver.tol,
        max_outer: cfg.solver.max_outer,
        allow_unstable: cfg.solver.allow_unstable,
        ..Default::default()
    };
    let mut out = begin(cfg, out_root, "solve-so", vec![])?;
    let (g1, g2, diag) = match solve_so(p.lambda, &p, &grid, weights, &opts) {
        Ok(v) => v,
        Err(e) => {
            #[derive(Serialize)]
            struct FailureReport {
                error: String,
            }
            out.json("solve_so_failure.json", &FailureReport { error: e.to_string() })?;
            out.finish()?;
            bail!("second-moment closure failed: {e}");
        }
    };

    out.csv(
        "gamma1.csv",
        "r_m,gamma1_users_per_m2",
        grid.centers
            .iter()
            .zip(&g1.values)
            .map(|(r, v)| format!("{r:.6},{v:.8e}")),
    )?;

    let fo = solve_fixed_point(p.lambda, &p)
        .ok()
        .and_then(|s| s.first().copied());
    let prof_origin = conditional_intensity(&g1, &g2, 0.0).map_err(|e| anyhow!("{e}"))?;
    let prof_edge =
        conditional_intensity(&g1, &g2, 0.99 * p.radius_r).map_err(|e| anyhow!("{e}"))?;
    out.csv(
        "conditional_intensity.csv",
        "r_m,intensity_fo_users_per_m2,cond_origin_users_per_m2,cond_edge_users_per_m2",
        (0..grid.n_r).map(|j| {
            let r = grid.centers[j];
            let fo_j = fo
                .as_ref()
                .and_then(|s| sbd_core::first_order::intensity_fo(r, s, &p).ok())
                .unwrap_or(f64::NAN);
            format!("{r:.6},{fo_j:.8e},{:.8e},{:.8e}", prof_origin[j], prof_edge[j])
        }),
    )?;

    // Comparison row; the simulated mean is pulled in when a simulate run
    // already left its summary in the same output root.
    let nbar_sim = std::fs::read_to_string(out_root.join("simulate/summary.json"))
        .ok()
        .and_then(|text| serde_json::from_str::<SimSummary>(&text).ok())
        .map(|s| s.nbar_mean_users);
    #[derive(Serialize)]
    struct Comparison {
        lambda_per_m2_s: f64,
        nbar_fo_users: Option<f64>,
        nbar_so_users: f64,
        nbar_sim_users: Option<f64>,
        outer_iterations: usize,
        final_residual: Option<f64>,
    }
    out.json(
        "comparison.json",
        &Comparison {
            lambda_per_m2_s: p.lambda,
            nbar_fo_users: fo.map(|s| s.nbar),
            nbar_so_users: g1.nbar(),
            nbar_sim_users: nbar_sim,
            outer_iterations: diag.outer_iterations,
            final_residual: diag.residual_history.last().copied(),
        },
    )?;
    println!(
        "nbar: closure {:.4}, first-order {}",
        g1.nbar(),
        fo.map(|s| format!("{:.4}", s.nbar)).unwrap_or_else(|| "-".into())
    );
    out.finish()
}

#[derive(Serialize, Deserialize)]
struct ReplicaSummary {
    seed: u64,
    nbar_users: f64,
    events: u64,
    elapsed_s: f64,
    diverged: bool,
    conservation_rel_error: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SimSummary {
    lambda_per_m2_s: f64,
    n_bands: usize,
    replicas_requested: usize,
    n_effective: usize,
    nbar_mean_users: f64,
    replicas: Vec<ReplicaSummary>,
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let p = params(cfg)?;
    let n_rep = cfg.sim.replicas.max(1);
    let seeds: Vec<u64> = (0..n_rep as u64).map(|i| cfg.seed + i).collect();
    let mut out = begin(cfg, out_root, "simulate", seeds.clone())?;

    let results: Vec<(u64, sbd_core::Result<TraceSummary>)> = seeds
        .par_iter()
        .map(|&seed| (seed, run(&p, &cfg.sim.to_options(seed))))
        .collect();

    let mut replicas = Vec::new();
    let mut traces = Vec::new();
    for (seed, res) in results {
        match res {
            Ok(t) => {
                let cons = rate_conservation_check(&t, &p).ok();
                replicas.push(ReplicaSummary {
                    seed,
                    nbar_users: t.nbar,
                    events: t.events,
                    elapsed_s: t.elapsed_s,
                    diverged: t.diverged,
                    conservation_rel_error: cons.map(|c| c.aggregate_rel_error),
                });
                traces.push(t);
            }
            Err(e) => log::error!("replica seed {seed} failed: {e}"),
        }
    }
    if traces.is_empty() {
        bail!("all replicas failed");
    }

    for (t, r) in traces.iter().zip(&replicas) {
        out.csv(
            &format!("trace_seed{}.csv", r.seed),
            "t_s,n_users",
            t.trace_t
                .iter()
                .zip(&t.trace_n)
                .map(|(t, n)| format!("{t:.6},{n}")),
        )?;
    }

    // Replica-averaged radial profiles.
    let n_bins = traces[0].intensity_r.len();
    let avg = |sel: fn(&TraceSummary) -> &Vec<f64>| -> Vec<f64> {
        (0..n_bins)
            .map(|b| traces.iter().map(|t| sel(t)[b]).sum::<f64>() / traces.len() as f64)
            .collect()
    };
    let intensity = avg(|t| &t.intensity);
    let origin = avg(|t| &t.cond_intensity_origin);
    let edge = avg(|t| &t.cond_intensity_edge);
    out.csv(
        "intensity.csv",
        "r_m,intensity_users_per_m2,cond_origin_users_per_m2,cond_edge_users_per_m2",
        (0..n_bins).map(|b| {
            format!(
                "{:.6},{:.8e},{:.8e},{:.8e}",
                traces[0].intensity_r[b], intensity[b], origin[b], edge[b]
            )
        }),
    )?;

    let nbar_mean = replicas.iter().map(|r| r.nbar_users).sum::<f64>() / replicas.len() as f64;
    let summary = SimSummary {
        lambda_per_m2_s: p.lambda,
        n_bands: cfg.sim.n_bands,
        replicas_requested: n_rep,
        n_effective: replicas.len(),
        nbar_mean_users: nbar_mean,
        replicas,
    };
    out.json("summary.json", &summary)?;
    println!(
        "{} of {} replicas, mean count {:.4} users",
        summary.n_effective, n_rep, nbar_mean
    );
    out.finish()
}

pub fn cmd_passage(cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let p = params(cfg)?;
    let pc = &cfg.passage;
    let mut out = begin(cfg, out_root, "passage", vec![])?;
    for &s2 in &pc.sigma2_list {
        let table = PassageTable::build(pc.n_max, pc.epsilon, s2)
            .map_err(|e| anyhow!("{e}"))?
            .with_time_scale(&p);
        let spu = table.seconds_per_unit;
        out.csv(
            &format!("passage_sigma2_{s2}.csv"),
            "n,tau_step_chain_units,tau_cum_chain_units,tau_cum_s",
            (0..table.tau_cum.len()).map(|n| {
                format!(
                    "{n},{:.8e},{:.8e},{:.8e}",
                    table.tau_step[n],
                    table.tau_cum[n],
                    table.tau_cum[n] * spu
                )
            }),
        )?;
    }
    let grid: Vec<f64> = (0..pc.sweep_points)
        .map(|i| {
            let f = if pc.sweep_points > 1 { i as f64 / (pc.sweep_points - 1) as f64 } else { 0.0 };
            pc.sweep_sigma2_min * (pc.sweep_sigma2_max / pc.sweep_sigma2_min).powf(f)
        })
        .collect();
    let sweep = tau_sigma_sweep(pc.sweep_n, pc.epsilon, &grid).map_err(|e| anyhow!("{e}"))?;
    out.csv(
        "sigma_sweep.csv",
        "inv_sigma2,tau_cum_chain_units",
        sweep.rows.iter().map(|(x, y)| format!("{x:.8e},{y:.8e}")),
    )?;
    #[derive(Serialize)]
    struct SweepFit {
        n: u64,
        epsilon: f64,
        fit_slope: f64,
        fit_intercept: f64,
        r_squared: f64,
        seconds_per_chain_unit: f64,
    }
    out.json(
        "sigma_sweep_fit.json",
        &SweepFit {
            n: sweep.n,
            epsilon: sweep.epsilon,
            fit_slope: sweep.fit_slope,
            fit_intercept: sweep.fit_intercept,
            r_squared: sweep.r_squared,
            seconds_per_chain_unit: std::f64::consts::LN_2 / (p.bandwidth_b * p.mu),
        },
    )?;
    println!("sweep fit: slope {:.4e}, R^2 {:.5}", sweep.fit_slope, sweep.r_squared);
    out.finish()
}

/// Figure presets: canned parameter sets that reuse the plain commands and
/// write plot-ready CSV under out/<figN>/.
pub fn cmd_preset(name: &str, cfg: &ExperimentConfig, out_root: &std::path::Path) -> Result<()> {
    let sub = out_root.join(name);
    let mut cfg = cfg.clone();
    match name {
        "fig1" => {
            // Sustainable rate against mean count: path-loss family at fixed
            // power, then inversion family at eta = 5.
            for eta in [3.0, 4.0, 5.0] {
                cfg.network.eta = eta;
                cfg.network.inversion_l = 0.0;
                let p = params(&cfg)?;
                let mut out = begin(&cfg, &sub, &format!("a_eta{eta}"), vec![])?;
                out.csv("sweep_fo.csv", "nbar_users,lambda_per_m2_s", sweep_rows(&p, 1e-2, 1e3, 200))?;
                out.finish()?;
            }
            for l in [0.0, 0.5, 1.0] {
                cfg.network.eta = 5.0;
                cfg.network.inversion_l = l;
                let p = params(&cfg)?;
                let mut out = begin(&cfg, &sub, &format!("b_l{l}"), vec![])?;
                out.csv("sweep_fo.csv", "nbar_users,lambda_per_m2_s", sweep_rows(&p, 1e-2, 1e3, 200))?;
                out.finish()?;
            }
            Ok(())
        }
        "fig2" => {
            // Simulation against the first-order prediction across loads.
            let mut rows = Vec::new();
            for (eta, lam) in [(5.0, 0.1), (5.0, 0.2), (5.0, 0.3), (4.0, 0.425)] {
                cfg.network.eta = eta;
                cfg.network.lambda_per_m2_s = lam;
                let p = params(&cfg)?;
                let fo = solve_fixed_point(lam, &p)
                    .map_err(|e| anyhow!("{e}"))?
                    .first()
                    .map(|s| s.nbar)
                    .ok_or_else(|| anyhow!("no stationary solution at lambda = {lam}"))?;
                let sim = replica_mean(&p, &cfg)?;
                rows.push(format!("{eta},{lam},{fo:.6e},{sim:.6e}"));
            }
            let mut out = begin(&cfg, out_root, name, vec![cfg.seed])?;
            out.csv("fo_vs_sim.csv", "eta,lambda_per_m2_s,nbar_fo_users,nbar_sim_users", rows)?;
            out.finish()
        }
        "fig3" => {
            // Closure accuracy where the first-order prediction goes loose.
            let mut rows = Vec::new();
            for (eta, lam) in [(5.0, 0.3), (4.0, 0.425)] {
                cfg.network.eta = eta;
                cfg.network.lambda_per_m2_s = lam;
                let p = params(&cfg)?;
                let fo = solve_fixed_point(lam, &p)
                    .map_err(|e| anyhow!("{e}"))?[0]
                    .nbar;
                let grid = RadialGrid::new(cfg.solver.n_r, cfg.solver.n_theta, p.radius_r)
                    .map_err(|e| anyhow!("{e}"))?;
                let (g1, _, _) = solve_so(lam, &p, &grid, cfg.solver.weights(), &SoOptions::default())
                    .map_err(|e| anyhow!("{e}"))?;
                let sim = replica_mean(&p, &cfg)?;
                rows.push(format!("{eta},{lam},{fo:.6e},{:.6e},{sim:.6e}", g1.nbar()));
            }
            let mut out = begin(&cfg, out_root, name, vec![cfg.seed])?;
            out.csv(
                "fo_so_sim.csv",
                "eta,lambda_per_m2_s,nbar_fo_users,nbar_so_users,nbar_sim_users",
                rows,
            )?;
            out.finish()
        }
        "fig4" => {
            cfg.network.eta = 4.0;
            cfg.network.lambda_per_m2_s = 0.425;
            cmd_solve_so(&cfg, &sub)
        }
        "fig5" => {
            // One metastable sample path: long plateau, then runaway growth.
            cfg.network.eta = 4.0;
            cfg.network.lambda_per_m2_s = 0.5;
            cfg.sim.horizon = 4_000_000;
            cfg.sim.replicas = 1;
            cfg.sim.divergence_threshold = Some(2000);
            cfg.sim.snapshot_cadence = 500;
            cmd_simulate(&cfg, &sub)
        }
        "fig6" => {
            cfg.network.eta = 4.0;
            cfg.network.lambda_per_m2_s = 0.8;
            cmd_sweep_fo(&cfg, &sub)?;
            cmd_solve_fo(&cfg, &sub)
        }
        "fig7" => {
            cfg.passage.epsilon = 0.01;
            cfg.passage.n_max = 30_000;
            cfg.passage.sigma2_list = vec![0.01, 11.0];
            cmd_passage(&cfg, &sub)
        }
        "fig8" => {
            cfg.passage.epsilon = 0.01;
            cfg.passage.n_max = 30_000;
            cfg.passage.sigma2_list = vec![0.01, 1.0, 11.0];
            cmd_passage(&cfg, &sub)
        }
        "fig9" => {
            cfg.passage.sweep_n = 20_000;
            cfg.passage.epsilon = 0.01;
            cmd_passage(&cfg, &sub)
        }
        other => bail!("unknown preset '{other}' (expected fig1..fig9)"),
    }
}

fn replica_mean(p: &NetworkParams, cfg: &ExperimentConfig) -> Result<f64> {
    let seeds: Vec<u64> = (0..cfg.sim.replicas.max(1) as u64).map(|i| cfg.seed + i).collect();
    let vals: Vec<f64> = seeds
        .par_iter()
        .map(|&s| run(p, &cfg.sim.to_options(s)).map(|t| t.nbar))
        .collect::<sbd_core::Result<_>>()
        .map_err(|e| anyhow!("{e}"))?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}
