//! Experiment configuration in TOML.
//!
//! Every key has a default, so an empty file is a valid configuration. A run
//! manifest is a resolved configuration plus a `[manifest]` table, and can be
//! fed back in as a configuration to reproduce the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{GbmBiasConfig, DEFAULT_THETA};
use crate::engine::{snap_to_grid, IntegrationGrid};
use crate::error::{invalid, Error, Result};
use crate::laplacian::RateMatrix;
use crate::models::{split_initial_data, ModelKind, ModelSpec, RatePositions};
use crate::sweep::{Axis, SweepParam, SweepSpec};

/// Name of the manifest table ignored when a manifest is loaded as config.
pub const MANIFEST_TABLE: &str = "manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `dgbm`, `gbm`, `cs-fixed` or `cs-full`.
    pub kind: String,
    pub n_agents: usize,
    pub dim: usize,
    pub lambda: f64,
    /// Noise strength shared by all agents.
    pub sigma: f64,
    /// Per-agent noise strengths; overrides `sigma` when non-empty.
    pub sigmas: Vec<f64>,
    pub beta: f64,
    /// `delayed` or `current`.
    pub rate_positions: String,
    /// Fixed symmetric rates for `cs-fixed`; empty means all-to-all unit rates.
    pub rates: Vec<Vec<f64>>,
    /// Velocity pre-history, `n_agents × dim`; empty means the split datum.
    pub initial_v: Vec<f64>,
    /// Position pre-history for `cs-full`; empty means all zeros.
    pub initial_x: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: "cs-fixed".into(),
            n_agents: 2,
            dim: 1,
            lambda: 1.0,
            sigma: 0.0,
            sigmas: Vec::new(),
            beta: 0.0,
            rate_positions: "delayed".into(),
            rates: Vec::new(),
            initial_v: Vec::new(),
            initial_x: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dt: f64,
    pub t_end: f64,
    pub tau: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 30.0,
            tau: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub q_paths: usize,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            q_paths: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: String,
    pub axis1_min: f64,
    pub axis1_max: f64,
    pub axis1_count: usize,
    pub axis2: String,
    pub axis2_min: f64,
    pub axis2_max: f64,
    pub axis2_count: usize,
    pub theta: f64,
    /// Replace `theta` by the delayed-GBM anchor value at `τ = π/(2λ)`.
    pub calibrate_theta: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis1: "sigma".into(),
            axis1_min: 0.0,
            axis1_max: 2.0,
            axis1_count: 50,
            axis2: "tau".into(),
            axis2_min: 0.0,
            axis2_max: 2.0,
            axis2_count: 50,
            theta: DEFAULT_THETA,
            calibrate_theta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmBiasSection {
    pub lambda: f64,
    pub sigma: f64,
    pub q_paths: usize,
    pub t_end: f64,
    pub samples: usize,
}

impl Default for GbmBiasSection {
    fn default() -> Self {
        let d = GbmBiasConfig::default();
        Self {
            lambda: d.lambda,
            sigma: d.sigma,
            q_paths: d.q_paths,
            t_end: d.t_end,
            samples: d.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FundamentalSection {
    pub lambda: f64,
    pub tau: f64,
    pub t_max: f64,
    pub dt: f64,
    /// When set, the L² criterion is evaluated against `1/σ²`.
    pub sigma: Option<f64>,
}

impl Default for FundamentalSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tau: 1.0,
            t_max: 30.0,
            dt: 1e-3,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write every `thin`-th sample of a single run.
    pub thin: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            thin: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub gbm_bias: GbmBiasSection,
    pub fundamental: FundamentalSection,
    pub output: OutputSection,
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("configuration: {e}"))
}

impl Config {
    /// Parses TOML text, ignoring a `[manifest]` table if present.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(config_error)?;
        table.remove(MANIFEST_TABLE);
        toml::Value::Table(table).try_into().map_err(config_error)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_error)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let kind = match m.kind.as_str() {
            "dgbm" => ModelKind::Dgbm,
            "gbm" => ModelKind::Gbm,
            "cs-fixed" => ModelKind::CsFixed,
            "cs-full" => ModelKind::CsFull,
            other => return invalid(format!("unknown model kind '{other}'")),
        };
        let rate_positions = match m.rate_positions.as_str() {
            "delayed" => RatePositions::Delayed,
            "current" => RatePositions::Current,
            other => return invalid(format!("unknown rate_positions '{other}'")),
        };
        let scalar = matches!(kind, ModelKind::Dgbm | ModelKind::Gbm);
        let n = if scalar { 1 } else { m.n_agents };
        let dim = if scalar { 1 } else { m.dim };
        let sigma = if m.sigmas.is_empty() {
            vec![m.sigma; n]
        } else {
            m.sigmas.clone()
        };
        let initial_v = if !m.initial_v.is_empty() {
            m.initial_v.clone()
        } else if scalar {
            vec![1.0]
        } else {
            let split = split_initial_data(n)?;
            split
                .iter()
                .flat_map(|&s| std::iter::repeat_n(s, dim))
                .collect()
        };
        let initial_x = match kind {
            ModelKind::CsFull if m.initial_x.is_empty() => vec![0.0; n * dim],
            ModelKind::CsFull => m.initial_x.clone(),
            _ => Vec::new(),
        };
        let rates = if m.rates.is_empty() {
            None
        } else {
            if m.rates.iter().any(|row| row.len() != m.rates.len()) {
                return invalid("rates must be a square matrix");
            }
            let k = m.rates.len();
            Some(RateMatrix::new(k, m.rates.concat())?)
        };
        let spec = ModelSpec {
            kind,
            n_agents: n,
            dim,
            lambda: m.lambda,
            sigma,
            beta: m.beta,
            rates,
            rate_positions,
            initial_v,
            initial_x,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Integration grid with the delay rounded to a multiple of `dt`.
    pub fn integration_grid(&self) -> Result<IntegrationGrid> {
        let g = &self.grid;
        IntegrationGrid::new(g.dt, g.t_end, snap_to_grid(g.tau, g.dt))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = &self.sweep;
        let spec = SweepSpec {
            model: self.model_spec()?,
            axis1: Axis::new(
                s.axis1.parse::<SweepParam>()?,
                s.axis1_min,
                s.axis1_max,
                s.axis1_count,
            ),
            axis2: Axis::new(
                s.axis2.parse::<SweepParam>()?,
                s.axis2_min,
                s.axis2_max,
                s.axis2_count,
            ),
            q_paths: self.ensemble.q_paths,
            dt: self.grid.dt,
            t_end: self.grid.t_end,
            tau: self.grid.tau,
            base_seed: self.ensemble.seed,
            theta: s.theta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gbm_bias_config(&self) -> GbmBiasConfig {
        let b = &self.gbm_bias;
        GbmBiasConfig {
            lambda: b.lambda,
            sigma: b.sigma,
            q_paths: b.q_paths,
            t_end: b.t_end,
            samples: b.samples,
            base_seed: self.ensemble.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_documented_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.grid.dt, 1e-3);
        assert_eq!(c.grid.t_end, 30.0);
        assert_eq!(c.ensemble.q_paths, 100);
        assert_eq!(c.model.lambda, 1.0);
        let spec = c.model_spec().unwrap();
        assert_eq!(spec.initial_v, vec![-1.0, 1.0]);
    }

    #[test]
    fn round_trips_through_text() {
        let mut c = Config::default();
        c.model.kind = "cs-full".into();
        c.model.beta = 1.0;
        c.grid.tau = 0.3;
        c.fundamental.sigma = Some(1.2);
        let text = c.to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
        let with_manifest = format!("[manifest]\nversion = \"x\"\n\n{text}");
        assert_eq!(Config::from_toml_str(&with_manifest).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(Config::from_toml_str("[model]\nlamda = 2.0\n").is_err());
        let c = Config::from_toml_str("[model]\nkind = \"boids\"\n").unwrap();
        assert!(c.model_spec().is_err());
        let c = Config::from_toml_str("[model]\nrates = [[0.0, 0.5], [0.4, 0.0]]\n").unwrap();
        assert!(c.model_spec().is_err());
        let c = Config::from_toml_str("[sweep]\naxis1 = \"tau\"\n").unwrap();
        assert!(c.sweep_spec().is_err());
    }

    #[test]
    fn delay_is_snapped_to_the_grid() {
        let c = Config::from_toml_str("[grid]\ntau = 1.5707963\n").unwrap();
        assert_eq!(c.integration_grid().unwrap().delay_steps(), 1571);
    }

    #[test]
    fn scalar_models_ignore_agent_count() {
        let c = Config::from_toml_str("[model]\nkind = \"dgbm\"\nsigma = 0.5\n").unwrap();
        let spec = c.model_spec().unwrap();
        assert_eq!(spec.n_agents, 1);
        assert_eq!(spec.initial_v, vec![1.0]);
        assert_eq!(spec.sigma, vec![0.5]);
    }
}
