//! The numerical flocking indicator
//! `I = (1/Q) Σ_q (Δt/N Σ_{k=(T−1)/Δt}^{T/Δt} |v^q_{t_k}|²)^{1/2}`.

use std::ops::Range;

use crate::engine::{
    run_ensemble, snap_to_grid, EnsembleOptions, EnsembleStats, IntegrationGrid, PathWindow,
};
use crate::error::{invalid, Error, Result};
use crate::models::ModelSpec;

/// Length of the terminal window, in time units.
pub const INDICATOR_WINDOW: f64 = 1.0;

/// Default flocking threshold `Θ`.
pub const DEFAULT_THETA: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorValue {
    /// Mean over the finite paths; `+∞` when no path stayed finite.
    pub value: f64,
    pub finite_paths: usize,
    /// Paths excluded because they diverged.
    pub diverged: usize,
}

/// Contribution of one path: `(Δt/N Σ_k |v_k|²)^{1/2}` over the rows of
/// `window`, reading velocity components `velocities` of each row.
pub fn path_indicator(
    window: &[f64],
    width: usize,
    velocities: Range<usize>,
    n_agents: usize,
    dt: f64,
) -> f64 {
    let sum: f64 = window
        .chunks_exact(width)
        .flat_map(|row| row[velocities.clone()].iter())
        .map(|v| v * v)
        .sum();
    (dt / n_agents as f64 * sum).sqrt()
}

/// Averages [`path_indicator`] over the stored terminal windows. Diverged
/// paths, and paths whose contribution overflows, are excluded and counted.
pub fn indicator_from_windows(
    windows: &[PathWindow],
    width: usize,
    velocities: Range<usize>,
    n_agents: usize,
    dt: f64,
) -> IndicatorValue {
    let mut sum = 0.0;
    let mut finite = 0;
    let mut diverged = 0;
    for w in windows {
        match w {
            Some(w) => {
                let i = path_indicator(w, width, velocities.clone(), n_agents, dt);
                if i.is_finite() {
                    sum += i;
                    finite += 1;
                } else {
                    diverged += 1;
                }
            }
            None => diverged += 1,
        }
    }
    let value = if finite == 0 {
        f64::INFINITY
    } else {
        sum / finite as f64
    };
    IndicatorValue {
        value,
        finite_paths: finite,
        diverged,
    }
}

/// Indicator of an ensemble that kept the window `[T − 1, T]`.
pub fn flocking_indicator(
    stats: &EnsembleStats,
    velocities: Range<usize>,
    n_agents: usize,
) -> Result<IndicatorValue> {
    let expected = stats.grid.window_start(INDICATOR_WINDOW)?;
    match stats.window_start {
        Some(s) if s == expected => {}
        Some(_) => return invalid("ensemble window is not the terminal unit interval"),
        None => return invalid("ensemble did not retain terminal windows"),
    }
    if velocities.end > stats.width || n_agents == 0 {
        return Err(Error::Dimension {
            expected: stats.width,
            got: velocities.end,
        });
    }
    Ok(indicator_from_windows(
        &stats.windows,
        stats.width,
        velocities,
        n_agents,
        stats.grid.dt(),
    ))
}

/// Runs `q_paths` of `spec` on `grid` and evaluates the indicator.
pub fn model_indicator(
    spec: &ModelSpec,
    grid: &IntegrationGrid,
    q_paths: usize,
    base_seed: u64,
    cell: u64,
) -> Result<IndicatorValue> {
    let system = spec.system()?;
    let options = EnsembleOptions {
        stride: 0,
        window: Some(INDICATOR_WINDOW),
        cell,
    };
    let stats = run_ensemble(&system, grid, q_paths, base_seed, options)?;
    let offset = spec.velocity_offset();
    flocking_indicator(
        &stats,
        offset..offset + spec.n_agents * spec.dim,
        spec.n_agents,
    )
}

/// `I < Θ`.
pub fn numerical_flocking(indicator: f64, theta: f64) -> bool {
    indicator < theta
}

/// Threshold anchored at the oscillation onset of delayed geometric Brownian
/// motion: `Θ = I_{0, π/(2λ)}`, with the delay rounded to the grid.
pub fn calibrate_threshold(lambda: f64, dt: f64, t_end: f64) -> Result<f64> {
    let tau = snap_to_grid(std::f64::consts::FRAC_PI_2 / lambda, dt);
    let grid = IntegrationGrid::new(dt, t_end, tau)?;
    let theta = model_indicator(&ModelSpec::dgbm(lambda, 0.0), &grid, 1, 0, 0)?.value;
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Numerical(format!("calibrated threshold is {theta}")));
    }
    Ok(theta)
}
