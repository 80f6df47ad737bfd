//! Two-parameter Monte-Carlo sweeps producing flocking phase diagrams.
//!
//! Every cell owns its seed material `(base_seed, cell(row, col), path, agent)`
//! and cells are assembled by index, so a grid depends only on its spec and
//! never on the number of workers.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analysis::{model_indicator, numerical_flocking, IndicatorValue};
use crate::engine::{snap_to_grid, IntegrationGrid, SeedMaterial};
use crate::error::{invalid, Error, Result};
use crate::models::ModelSpec;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "CSDELAY_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Sigma,
    Tau,
    Beta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sigma => "sigma",
            Self::Tau => "tau",
            Self::Beta => "beta",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(Self::Sigma),
            "tau" => Ok(Self::Tau),
            "beta" => Ok(Self::Beta),
            other => invalid(format!(
                "unknown sweep parameter '{other}' (sigma, tau, beta)"
            )),
        }
    }
}

/// Equidistant values `min, …, max` of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(param: SweepParam, min: f64, max: f64, count: usize) -> Self {
        Self {
            param,
            min,
            max,
            count,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| self.min + k as f64 * step)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return invalid(format!("axis '{}' needs at least 2 points", self.param));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return invalid(format!("axis '{}' has an invalid range", self.param));
        }
        if self.min < 0.0 && self.param != SweepParam::Sigma {
            return invalid(format!("axis '{}' must be non-negative", self.param));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Template; swept parameters override its values cell by cell.
    pub model: ModelSpec,
    pub axis1: Axis,
    pub axis2: Axis,
    pub q_paths: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Delay used when `tau` is not swept.
    pub tau: f64,
    pub base_seed: u64,
    pub theta: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        if self.axis1.param == self.axis2.param {
            return invalid("the two swept parameters must differ");
        }
        if self.q_paths == 0 {
            return invalid("q_paths must be at least 1");
        }
        if !(self.theta > 0.0) {
            return invalid(format!("threshold must be positive, got {}", self.theta));
        }
        let sweeps_beta =
            self.axis1.param == SweepParam::Beta || self.axis2.param == SweepParam::Beta;
        if sweeps_beta && self.model.kind != crate::models::ModelKind::CsFull {
            return invalid("beta can only be swept for the full model");
        }
        IntegrationGrid::new(self.dt, self.t_end, snap_to_grid(self.tau, self.dt))?;
        self.model.validate()
    }

    /// Axis values as simulated: delays are rounded to multiples of `dt`.
    pub fn axis_values(&self, axis: &Axis) -> Vec<f64> {
        let values = axis.values();
        match axis.param {
            SweepParam::Tau => values
                .into_iter()
                .map(|t| snap_to_grid(t, self.dt))
                .collect(),
            _ => values,
        }
    }

    fn sweeps(&self, param: SweepParam) -> bool {
        self.axis1.param == param || self.axis2.param == param
    }
}

/// Indicator values on a sweep grid, stored axis1-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub axis1: SweepParam,
    pub axis2: SweepParam,
    pub axis1_values: Vec<f64>,
    pub axis2_values: Vec<f64>,
    /// Finite or `+∞`.
    pub values: Vec<f64>,
    pub diverged: Vec<usize>,
    /// Paths simulated per cell.
    pub paths: Vec<usize>,
}

impl PhaseGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.axis2_values.len() + j
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis1_values.len(), self.axis2_values.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockingRegion {
    pub mask: Vec<bool>,
    /// For each axis1 value, the largest axis2 value whose cell flocks.
    pub boundary: Vec<Option<f64>>,
}

pub fn flocking_region(grid: &PhaseGrid, theta: f64) -> FlockingRegion {
    let mask: Vec<bool> = grid
        .values
        .iter()
        .map(|&v| numerical_flocking(v, theta))
        .collect();
    let (n1, n2) = grid.shape();
    let boundary = (0..n1)
        .map(|i| {
            (0..n2)
                .rev()
                .find(|&j| mask[i * n2 + j])
                .map(|j| grid.axis2_values[j])
        })
        .collect();
    FlockingRegion { mask, boundary }
}

/// Worker count from the environment, falling back to the available cores.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cell_indicator(
    spec: &SweepSpec,
    v1: f64,
    v2: f64,
    row: usize,
    col: usize,
) -> Result<(IndicatorValue, usize)> {
    let mut model = spec.model.clone();
    let mut tau = snap_to_grid(spec.tau, spec.dt);
    for (param, value) in [(spec.axis1.param, v1), (spec.axis2.param, v2)] {
        match param {
            SweepParam::Sigma => model = model.with_sigma(value),
            SweepParam::Beta => model = model.with_beta(value),
            SweepParam::Tau => tau = value,
        }
    }
    let grid = IntegrationGrid::new(spec.dt, spec.t_end, tau)?;
    // Without noise every path coincides.
    let q = if model.sigma.iter().all(|&s| s == 0.0) {
        1
    } else {
        spec.q_paths
    };
    let cell = SeedMaterial::cell_index(row, col);
    Ok((model_indicator(&model, &grid, q, spec.base_seed, cell)?, q))
}

/// Runs every cell of the sweep on a pool of `workers` threads
/// (`None`: [`default_workers`]).
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<PhaseGrid> {
    spec.validate()?;
    let a1 = spec.axis_values(&spec.axis1);
    let a2 = spec.axis_values(&spec.axis2);
    let n2 = a2.len();
    let threads = workers.unwrap_or_else(default_workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    debug_assert!(!spec.sweeps(SweepParam::Tau) || a1.iter().chain(&a2).all(|v| v.is_finite()));

    let cells: Vec<(IndicatorValue, usize)> = pool.install(|| {
        (0..a1.len() * n2)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n2, idx % n2);
                cell_indicator(spec, a1[i], a2[j], i, j)
            })
            .collect::<Result<_>>()
    })?;
    Ok(PhaseGrid {
        axis1: spec.axis1.param,
        axis2: spec.axis2.param,
        axis1_values: a1,
        axis2_values: a2,
        values: cells.iter().map(|(c, _)| c.value).collect(),
        diverged: cells.iter().map(|(c, _)| c.diverged).collect(),
        paths: cells.iter().map(|&(_, q)| q).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dgbm_spec(count: usize, q: usize) -> SweepSpec {
        SweepSpec {
            model: ModelSpec::dgbm(1.0, 0.0),
            axis1: Axis::new(SweepParam::Sigma, 0.0, 2.0, count),
            axis2: Axis::new(SweepParam::Tau, 0.0, 2.0, count),
            q_paths: q,
            dt: 0.01,
            t_end: 5.0,
            tau: 0.0,
            base_seed: 3,
            theta: 1e-2,
        }
    }

    #[test]
    fn axis_values_are_equidistant_and_snapped() {
        let spec = dgbm_spec(20, 1);
        let raw = spec.axis1.values();
        assert_eq!(raw.len(), 20);
        assert_eq!(raw[0], 0.0);
        assert!((raw[19] - 2.0).abs() < 1e-15);
        let taus = spec.axis_values(&spec.axis2);
        for t in taus {
            assert!(crate::engine::whole_steps(t, spec.dt).is_some());
        }
    }

    #[test]
    fn small_grid_is_reproducible_across_workers() {
        let spec = dgbm_spec(2, 2);
        let a = run_sweep(&spec, Some(1)).unwrap();
        let b = run_sweep(&spec, Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.paths, vec![1, 1, 2, 2]);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = dgbm_spec(2, 1);
        spec.axis2.param = SweepParam::Sigma;
        assert!(run_sweep(&spec, Some(1)).is_err());
        let mut spec = dgbm_spec(1, 1);
        spec.axis1.count = 1;
        assert!(run_sweep(&spec, Some(1)).is_err());
        let mut spec = dgbm_spec(2, 1);
        spec.axis2.param = SweepParam::Beta;
        assert!(spec.validate().is_err());
        assert!("gamma".parse::<SweepParam>().is_err());
    }

    #[test]
    fn region_and_boundary() {
        let grid = PhaseGrid {
            axis1: SweepParam::Sigma,
            axis2: SweepParam::Tau,
            axis1_values: vec![0.0, 1.0],
            axis2_values: vec![0.0, 0.5, 1.0],
            values: vec![1e-3, 1e-3, 0.5, f64::INFINITY, 2e-2, 0.1],
            diverged: vec![0; 6],
            paths: vec![1; 6],
        };
        let r = flocking_region(&grid, 1e-2);
        assert_eq!(r.mask, vec![true, true, false, false, false, false]);
        assert_eq!(r.boundary, vec![Some(0.5), None]);
        let zeros = PhaseGrid {
            values: vec![0.0; 6],
            ..grid
        };
        assert!(flocking_region(&zeros, 1e-2).mask.iter().all(|&m| m));
    }
}
