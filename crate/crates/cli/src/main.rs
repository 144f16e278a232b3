//! `sbd`: command-line front end for the uplink birth-death model.

mod commands;
mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sbd_core::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "sbd", version, about = "Traffic dynamics of a single-cell uplink network")]
struct Cli {
    /// Path to a TOML experiment configuration (defaults are used if absent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the base random seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides SBD_OUT_DIR and the config [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Dotted config override, e.g. --set network.eta=5.0 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker thread count (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the critical arrival rate and classify the configured load.
    Critical,
    /// Sweep the first-order sustainable arrival rate over a mean-count grid.
    SweepFo,
    /// Solve the first-order fixed point at the configured arrival rate.
    SolveFo,
    /// Run the second-moment closure and emit conditional intensity profiles.
    SolveSo,
    /// Simulate replicas of the network and emit traces and profiles.
    Simulate,
    /// Tabulate analytic escape times for the full-inversion chain.
    Passage,
    /// Run a named figure preset (fig1 .. fig9).
    Preset {
        #[arg(value_name = "NAME")]
        name: String,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_toml(&text).map_err(|e| anyhow::anyhow!("{e}"))?
        }
        None => ExperimentConfig::default(),
    };
    for assignment in &cli.overrides {
        cfg.apply_override(assignment)
            .map_err(|e| anyhow::anyhow!("--set {assignment}: {e}"))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_root(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("SBD_OUT_DIR").map(PathBuf::from))
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli)?;
    let root = out_root(&cli, &cfg);
    match &cli.command {
        Command::Critical => commands::cmd_critical(&cfg, &root),
        Command::SweepFo => commands::cmd_sweep_fo(&cfg, &root),
        Command::SolveFo => commands::cmd_solve_fo(&cfg, &root),
        Command::SolveSo => commands::cmd_solve_so(&cfg, &root),
        Command::Simulate => commands::cmd_simulate(&cfg, &root),
        Command::Passage => commands::cmd_passage(&cfg, &root),
        Command::Preset { name } => commands::cmd_preset(name, &cfg, &root),
    }
}
