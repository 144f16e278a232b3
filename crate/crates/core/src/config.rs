//! Experiment configuration (sectioned TOML with units in the key names)
//! and the run manifest that makes outputs reproducible artifacts.

use serde::{Deserialize, Serialize};

use crate::model::{NetworkParams, RateMode};
use crate::second_order::FactorWeights;
use crate::sim::{SimMode, SimOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub lambda_per_m2_s: f64,
    pub mu_per_bit: f64,
    pub bandwidth_hz: f64,
    /// Linear normalized noise power. Exactly one of this and `sigma2_dbm`
    /// may be given; neither means the -50 dBm default (1e-8).
    pub sigma2_tilde: Option<f64>,
    /// Noise in dBm over a 1 W normalized transmit power.
    pub sigma2_dbm: Option<f64>,
    pub inversion_l: f64,
    pub eta: f64,
    pub radius_m: f64,
    pub rate_mode: RateModeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateModeConfig {
    #[default]
    LowSinr,
    General,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            lambda_per_m2_s: 0.3,
            mu_per_bit: 0.01,
            bandwidth_hz: 1e6,
            sigma2_tilde: None,
            sigma2_dbm: None,
            inversion_l: 0.0,
            eta: 4.0,
            radius_m: 100.0,
            rate_mode: RateModeConfig::LowSinr,
        }
    }
}

impl NetworkConfig {
    pub fn to_params(&self) -> Result<NetworkParams> {
        let sigma2 = match (self.sigma2_tilde, self.sigma2_dbm) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give sigma2_tilde or sigma2_dbm, not both".into(),
                ))
            }
            (Some(lin), None) => lin,
            (None, Some(dbm)) => 10f64.powf((dbm - 30.0) / 10.0),
            (None, None) => 1e-8,
        };
        let params = NetworkParams {
            lambda: self.lambda_per_m2_s,
            mu: self.mu_per_bit,
            bandwidth_b: self.bandwidth_hz,
            sigma2_tilde: sigma2,
            inversion_l: self.inversion_l,
            eta: self.eta,
            radius_r: self.radius_m,
            rate_mode: match self.rate_mode {
                RateModeConfig::LowSinr => RateMode::LowSinr,
                RateModeConfig::General => RateMode::General,
            },
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub mode: SimModeConfig,
    pub horizon: u64,
    pub n_bands: usize,
    pub replicas: usize,
    pub warmup_fraction: f64,
    pub snapshot_cadence: u64,
    pub divergence_threshold: Option<u64>,
    pub n_annuli: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimModeConfig {
    #[default]
    ExactEvent,
    DiscreteStep,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: SimModeConfig::ExactEvent,
            horizon: 1_000_000,
            n_bands: 1,
            replicas: 3,
            warmup_fraction: 0.2,
            snapshot_cadence: 1000,
            divergence_threshold: None,
            n_annuli: 16,
        }
    }
}

impl SimConfig {
    pub fn to_options(&self, seed: u64) -> SimOptions {
        SimOptions {
            mode: match self.mode {
                SimModeConfig::ExactEvent => SimMode::ExactEvent,
                SimModeConfig::DiscreteStep => SimMode::DiscreteStep,
            },
            horizon: self.horizon,
            n_bands: self.n_bands,
            seed,
            warmup_fraction: self.warmup_fraction,
            divergence_threshold: self.divergence_threshold,
            snapshot_cadence: self.snapshot_cadence,
            hit_targets: Vec::new(),
            stop_when_hit: false,
            n_annuli: self.n_annuli,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_r: usize,
    pub n_theta: usize,
    pub weight_a: f64,
    pub weight_b: f64,
    pub weight_c: f64,
    pub weight_d: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub allow_unstable: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let w = FactorWeights::default();
        SolverConfig {
            n_r: 32,
            n_theta: 16,
            weight_a: w.a,
            weight_b: w.b,
            weight_c: w.c,
            weight_d: w.d,
            tol: 1e-5,
            max_outer: 200,
            allow_unstable: false,
        }
    }
}

impl SolverConfig {
    pub fn weights(&self) -> FactorWeights {
        FactorWeights { a: self.weight_a, b: self.weight_b, c: self.weight_c, d: self.weight_d }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub nbar_min: f64,
    pub nbar_max: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { nbar_min: 1e-2, nbar_max: 1e3, points: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PassageConfig {
    pub epsilon: f64,
    pub n_max: u64,
    pub sigma2_list: Vec<f64>,
    pub sweep_n: u64,
    pub sweep_sigma2_min: f64,
    pub sweep_sigma2_max: f64,
    pub sweep_points: usize,
}

impl Default for PassageConfig {
    fn default() -> Self {
        PassageConfig {
            epsilon: 0.01,
            n_max: 30_000,
            sigma2_list: vec![0.01, 1.0, 11.0],
            sweep_n: 20_000,
            sweep_sigma2_min: 1e-4,
            sweep_sigma2_max: 1e-1,
            sweep_points: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; overridden by --out and the SBD_OUT_DIR env var.
    pub dir: Option<String>,
}

/// Whole-experiment configuration. Every physical quantity carries its unit
/// in the key name; all conversions happen at parse time.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub passage: PassageConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Apply one `--set section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not KEY=VALUE")))?;
        let mut doc: toml::Value =
            toml::from_str(&self.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut doc;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for part in &parts[..parts.len() - 1] {
            node = node
                .get_mut(part)
                .ok_or_else(|| Error::Config(format!("unknown config section '{part}'")))?;
        }
        let leaf = parts.last().expect("non-empty key");
        let parsed: toml::Value = toml::from_str(&format!("x = {}", value.trim()))
            .map_err(|e| Error::Config(format!("cannot parse value '{value}': {e}")))
            .and_then(|v: toml::Value| {
                v.get("x").cloned().ok_or_else(|| Error::Config("bad override value".into()))
            })
            .or_else(|_| -> Result<toml::Value> { Ok(toml::Value::String(value.trim().to_string())) })?;
        match node.get_mut(leaf) {
            Some(slot) => *slot = parsed,
            None => {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("'{key}' does not address a table")))?;
                table.insert(leaf.to_string(), parsed);
            }
        }
        *self = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub started_utc: String,
    pub finished_utc: String,
    pub outputs: Vec<OutputChecksum>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputChecksum {
    pub path: String,
    pub sha256: String,
}
