//! Euler–Maruyama integration of delayed SDEs with constant pre-history.
//!
//! A system advances as
//! `X_{k+1} = X_k + dt·F(X_k, X_{k−m}) + √dt·G(X_k, X_{k−m})∘Z_k`
//! where `m = τ/dt` and `Z_k` are independent standard normals. States
//! before `t = 0` equal the initial datum.

mod grid;
mod history;
mod noise;

pub use grid::{snap_to_grid, whole_steps, IntegrationGrid, COMMENSURATE_RTOL};
pub use history::HistoryBuffer;
pub use noise::{NoiseStream, SeedMaterial};

use rayon::prelude::*;

use crate::error::{check_len, invalid, Result};

/// Number of paths simulated between ordered reductions in [`run_ensemble`].
const PATH_CHUNK: usize = 256;

/// A delayed SDE in Itô form with diagonal noise.
pub trait SdeSystem: Sync {
    /// Per-thread scratch space reused across steps.
    type Workspace: Send;

    /// Length of the state vector.
    fn width(&self) -> usize;

    /// Number of independent noise sources (agents).
    fn noise_channels(&self) -> usize;

    /// Gaussian increments drawn per channel and step.
    fn noise_dim(&self) -> usize {
        1
    }

    /// Index of the first state component driven by noise. Increments for
    /// channel `c` land at `noise_offset + c·noise_dim ..`.
    fn noise_offset(&self) -> usize {
        0
    }

    /// True when every diffusion coefficient vanishes identically.
    fn is_deterministic(&self) -> bool {
        false
    }

    fn initial_state(&self) -> Vec<f64>;

    fn workspace(&self) -> Self::Workspace;

    /// Evaluates drift and diffusion from the current and the delayed state.
    fn coefficients(
        &self,
        current: &[f64],
        delayed: &[f64],
        drift: &mut [f64],
        diffusion: &mut [f64],
        ws: &mut Self::Workspace,
    );
}

/// One Euler–Maruyama step:
/// `next = current + dt·drift + √dt·diffusion∘increments`.
///
/// Returns `false` if any component of `next` is not finite.
#[inline]
pub fn em_step(
    current: &[f64],
    drift: &[f64],
    diffusion: &[f64],
    increments: &[f64],
    dt: f64,
    next: &mut [f64],
) -> bool {
    let sqrt_dt = dt.sqrt();
    let mut finite = true;
    for i in 0..next.len() {
        let x = current[i] + dt * drift[i] + sqrt_dt * diffusion[i] * increments[i];
        finite &= x.is_finite();
        next[i] = x;
    }
    finite
}

/// Samples of one path on `[0, T]`, row-major `(steps + 1) × width`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedTrajectory {
    pub grid: IntegrationGrid,
    pub width: usize,
    pub states: Vec<f64>,
    /// Step at which a non-finite value first appeared; states stop before it.
    pub diverged_at: Option<usize>,
}

impl DelayedTrajectory {
    /// Number of stored samples.
    pub fn len(&self) -> usize {
        self.states.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.width..(k + 1) * self.width]
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Integrates one path, handing every stored state `(k, X_k)` to `sink`,
/// starting with the initial datum at `k = 0`.
///
/// Returns the first diverged step, if any.
pub fn integrate<S, F>(
    system: &S,
    grid: &IntegrationGrid,
    seed: SeedMaterial,
    mut sink: F,
) -> Result<Option<usize>>
where
    S: SdeSystem + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let width = system.width();
    let init = system.initial_state();
    check_len(width, init.len())?;
    let channels = system.noise_channels();
    let d = system.noise_dim();
    let offset = system.noise_offset();
    if offset + channels * d > width {
        return invalid("noise channels exceed the state width");
    }
    let deterministic = system.is_deterministic();
    let mut streams: Vec<NoiseStream> = if deterministic {
        Vec::new()
    } else {
        (0..channels)
            .map(|c| {
                NoiseStream::new(SeedMaterial {
                    agent: c as u64,
                    ..seed
                })
            })
            .collect()
    };

    let mut history = HistoryBuffer::new(width, grid.delay_steps(), &init);
    let mut drift = vec![0.0; width];
    let mut diffusion = vec![0.0; width];
    let mut increments = vec![0.0; width];
    let mut next = vec![0.0; width];
    let mut ws = system.workspace();
    let dt = grid.dt();

    sink(0, &init);
    for k in 0..grid.n_steps() {
        let (current, delayed) = history.current_and_delayed();
        system.coefficients(current, delayed, &mut drift, &mut diffusion, &mut ws);
        for (c, stream) in streams.iter_mut().enumerate() {
            let start = offset + c * d;
            stream.fill_normals(&mut increments[start..start + d]);
        }
        if !em_step(current, &drift, &diffusion, &increments, dt, &mut next) {
            return Ok(Some(k + 1));
        }
        history.push(&next);
        sink(k + 1, &next);
    }
    Ok(None)
}

/// Integrates one path and keeps every sample.
pub fn simulate_path<S: SdeSystem + ?Sized>(
    system: &S,
    grid: &IntegrationGrid,
    seed: SeedMaterial,
) -> Result<DelayedTrajectory> {
    let width = system.width();
    let mut states = Vec::with_capacity((grid.n_steps() + 1) * width);
    let diverged_at = integrate(system, grid, seed, |_, x| states.extend_from_slice(x))?;
    Ok(DelayedTrajectory {
        grid: *grid,
        width,
        states,
        diverged_at,
    })
}

/// What [`run_ensemble`] records besides divergence flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    /// Accumulate moments every `stride` steps; 0 disables moment tracking.
    pub stride: usize,
    /// Length (time units) of the terminal window kept per path.
    pub window: Option<f64>,
    /// Cell slot of the seed material.
    pub cell: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            window: None,
            cell: 0,
        }
    }
}

/// Terminal samples of one path, row-major; `None` when the path diverged.
pub type PathWindow = Option<Vec<f64>>;

/// Per-time moment estimates over the non-diverged paths of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub grid: IntegrationGrid,
    pub width: usize,
    /// Step indices at which moments were accumulated.
    pub sample_steps: Vec<usize>,
    /// `sample × width` sample means.
    pub mean: Vec<f64>,
    /// `sample × width` sample second moments.
    pub second_moment: Vec<f64>,
    /// Paths contributing to the moments.
    pub paths_used: usize,
    pub diverged: usize,
    /// First step of the terminal window, when windows were requested.
    pub window_start: Option<usize>,
    /// One entry per path, in path order.
    pub windows: Vec<PathWindow>,
}

impl EnsembleStats {
    pub fn mean_at(&self, sample: usize) -> &[f64] {
        &self.mean[sample * self.width..(sample + 1) * self.width]
    }

    pub fn second_moment_at(&self, sample: usize) -> &[f64] {
        &self.second_moment[sample * self.width..(sample + 1) * self.width]
    }
}

struct PathRecord {
    samples: Vec<f64>,
    window: Vec<f64>,
    diverged: bool,
}

/// Runs `q_paths` independent paths (in parallel on the current rayon pool)
/// and reduces them in path order, so the result depends only on the seed
/// material and never on scheduling.
pub fn run_ensemble<S: SdeSystem + ?Sized>(
    system: &S,
    grid: &IntegrationGrid,
    q_paths: usize,
    base_seed: u64,
    options: EnsembleOptions,
) -> Result<EnsembleStats> {
    if q_paths == 0 {
        return invalid("ensemble needs at least one path");
    }
    let width = system.width();
    let window_start = options.window.map(|w| grid.window_start(w)).transpose()?;
    let sample_steps: Vec<usize> = if options.stride == 0 {
        Vec::new()
    } else {
        (0..=grid.n_steps()).step_by(options.stride).collect()
    };
    let n_samples = sample_steps.len();
    let mut sum = vec![0.0; n_samples * width];
    let mut sum_sq = vec![0.0; n_samples * width];
    let mut windows = Vec::with_capacity(q_paths);
    let mut used = 0;
    let mut diverged = 0;

    let run_one = |path: usize| -> Result<PathRecord> {
        let seed = SeedMaterial::new(base_seed, options.cell, path as u64, 0);
        let mut samples = Vec::with_capacity(n_samples * width);
        let mut window = Vec::new();
        let div = integrate(system, grid, seed, |k, x| {
            if options.stride != 0 && k % options.stride == 0 {
                samples.extend_from_slice(x);
            }
            if window_start.is_some_and(|s| k >= s) {
                window.extend_from_slice(x);
            }
        })?;
        Ok(PathRecord {
            samples,
            window,
            diverged: div.is_some(),
        })
    };

    for chunk_start in (0..q_paths).step_by(PATH_CHUNK) {
        let chunk_end = (chunk_start + PATH_CHUNK).min(q_paths);
        let records: Vec<PathRecord> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<_>>()?;
        for rec in records {
            if rec.diverged {
                diverged += 1;
                windows.push(None);
                continue;
            }
            used += 1;
            for ((s, s2), x) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&rec.samples) {
                *s += x;
                *s2 += x * x;
            }
            windows.push(window_start.map(|_| rec.window));
        }
    }

    if used > 0 {
        let inv = 1.0 / used as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
        sum_sq.iter_mut().for_each(|s| *s *= inv);
    } else {
        sum.fill(f64::NAN);
        sum_sq.fill(f64::NAN);
    }
    Ok(EnsembleStats {
        grid: *grid,
        width,
        sample_steps,
        mean: sum,
        second_moment: sum_sq,
        paths_used: used,
        diverged,
        window_start,
        windows,
    })
}

/// Applies `f` to every simulated path and returns the results in path order.
pub fn map_paths<S, R, F>(
    system: &S,
    grid: &IntegrationGrid,
    q_paths: usize,
    base_seed: u64,
    cell: u64,
    f: F,
) -> Result<Vec<R>>
where
    S: SdeSystem + ?Sized,
    R: Send,
    F: Fn(&DelayedTrajectory) -> R + Sync,
{
    (0..q_paths)
        .into_par_iter()
        .map(|path| {
            let seed = SeedMaterial::new(base_seed, cell, path as u64, 0);
            simulate_path(system, grid, seed).map(|traj| f(&traj))
        })
        .collect()
}
