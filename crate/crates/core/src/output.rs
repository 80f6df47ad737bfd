//! CSV tables and run manifests.
//!
//! Floats are written with 17 significant digits in scientific notation so
//! that every value parses back to the identical double.

use std::io::{self, Write};

use serde::Serialize;

use crate::analysis::GbmBiasRow;
use crate::config::{Config, MANIFEST_TABLE};
use crate::engine::DelayedTrajectory;
use crate::error::{Error, Result};
use crate::models::ModelSystem;
use crate::sweep::{flocking_region, PhaseGrid};

pub const TRAJECTORY_HEADER: &str = "t,agent,x,v";
pub const SWEEP_HEADER: &str = "axis1,axis2,indicator,log10_indicator,flocking,diverged_paths";
pub const GBM_BIAS_HEADER: &str =
    "t,log_mc_second_moment,log_exact_second_moment,log_ratio_mc,log_ratio_theory";
pub const FUNDAMENTAL_HEADER: &str = "t,r";

/// `{:.16e}`: 17 significant digits, exact round trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per `(sample, agent)`; the position column is empty for
/// velocity-only models. Only one-dimensional agents are supported.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    system: &ModelSystem,
    traj: &DelayedTrajectory,
    thin: usize,
) -> Result<()> {
    let spec = system.spec();
    if spec.dim != 1 {
        return Err(Error::Invalid(format!(
            "trajectory CSV holds one-dimensional agents only, got dim = {}",
            spec.dim
        )));
    }
    let thin = thin.max(1);
    let io = |e: io::Error| Error::Invalid(format!("write failed: {e}"));
    writeln!(out, "{TRAJECTORY_HEADER}").map_err(io)?;
    for k in (0..traj.len()).step_by(thin) {
        let state = traj.state(k);
        let t = fmt_float(traj.grid.time(k));
        let v = system.velocities(state);
        let x = system.positions(state);
        for agent in 0..spec.n_agents {
            let xs = x.map(|x| fmt_float(x[agent])).unwrap_or_default();
            writeln!(out, "{t},{agent},{xs},{}", fmt_float(v[agent])).map_err(io)?;
        }
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: &mut W, grid: &PhaseGrid, theta: f64) -> Result<()> {
    let io = |e: io::Error| Error::Invalid(format!("write failed: {e}"));
    let region = flocking_region(grid, theta);
    writeln!(out, "{SWEEP_HEADER}").map_err(io)?;
    let (n1, n2) = grid.shape();
    for i in 0..n1 {
        for j in 0..n2 {
            let idx = grid.index(i, j);
            let v = grid.values[idx];
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_float(grid.axis1_values[i]),
                fmt_float(grid.axis2_values[j]),
                fmt_float(v),
                fmt_float(v.log10()),
                u8::from(region.mask[idx]),
                grid.diverged[idx]
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

pub fn write_gbm_bias_csv<W: Write>(out: &mut W, rows: &[GbmBiasRow]) -> Result<()> {
    let io = |e: io::Error| Error::Invalid(format!("write failed: {e}"));
    writeln!(out, "{GBM_BIAS_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(r.t),
            fmt_float(r.log_mc_second_moment),
            fmt_float(r.log_exact_second_moment),
            fmt_float(r.log_ratio_mc),
            fmt_float(r.log_ratio_theory)
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn write_fundamental_csv<W: Write>(out: &mut W, dt: f64, r: &[f64]) -> Result<()> {
    let io = |e: io::Error| Error::Invalid(format!("write failed: {e}"));
    writeln!(out, "{FUNDAMENTAL_HEADER}").map_err(io)?;
    for (k, rk) in r.iter().enumerate() {
        writeln!(out, "{},{}", fmt_float(k as f64 * dt), fmt_float(*rk)).map_err(io)?;
    }
    Ok(())
}

/// Provenance of one run, written next to its data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub base_seed: u64,
    /// Seconds since the Unix epoch at the end of the run.
    pub finished_at_unix: u64,
    pub wall_clock_seconds: f64,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    /// Delays actually simulated after rounding to the time grid.
    pub snapped_tau: Vec<f64>,
    /// Diverged paths per sweep cell (axis1-major) or per run.
    pub diverged_paths: Vec<usize>,
    /// Numerical threshold used for flocking decisions, when relevant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Truncation level realized by the bias study, when relevant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, base_seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            base_seed,
            finished_at_unix: 0,
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            snapped_tau: Vec::new(),
            diverged_paths: Vec::new(),
            theta: None,
            eta: None,
        }
    }
}

/// The manifest table followed by the fully resolved configuration.
pub fn manifest_toml(manifest: &RunManifest, config: &Config) -> Result<String> {
    let err = |e: toml::ser::Error| Error::Invalid(format!("manifest: {e}"));
    let mut table = toml::Table::new();
    table.insert(
        MANIFEST_TABLE.into(),
        toml::Value::try_from(manifest).map_err(err)?,
    );
    let mut text = toml::to_string(&table).map_err(err)?;
    text.push('\n');
    text.push_str(&toml::to_string(config).map_err(err)?);
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate_path, IntegrationGrid, SeedMaterial};
    use crate::models::ModelSpec;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn trajectory_layout() {
        let sys = ModelSpec::cs_full(2, 1.0, 0.0, 1.0)
            .unwrap()
            .system()
            .unwrap();
        let grid = IntegrationGrid::new(0.5, 1.0, 0.5).unwrap();
        let traj = simulate_path(&sys, &grid, SeedMaterial::new(0, 0, 0, 0)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &sys, &traj, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert!(lines[1].starts_with("0.0000000000000000e0,0,0.0000000000000000e0,"));

        let sys = ModelSpec::dgbm(1.0, 0.0).system().unwrap();
        let traj = simulate_path(&sys, &grid, SeedMaterial::new(0, 0, 0, 0)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &sys, &traj, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2);
        assert!(text.lines().nth(1).unwrap().contains(",0,,"));
    }

    #[test]
    fn manifest_reloads_as_config() {
        let mut config = Config::default();
        config.ensemble.seed = 17;
        let mut m = RunManifest::new("sweep", 17);
        m.diverged_paths = vec![0, 3];
        m.theta = Some(0.01);
        let text = manifest_toml(&m, &config).unwrap();
        assert!(text.starts_with("[manifest]"));
        assert_eq!(Config::from_toml_str(&text).unwrap(), config);
    }
}
