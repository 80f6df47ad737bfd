//! Drift and diffusion of the simulated systems.
//!
//! * delayed geometric Brownian motion `dw = −λ w̃ dt + σ w̃ dB`,
//! * growing geometric Brownian motion `dv = λ ṽ dt + σ ṽ dB` (bias study),
//! * velocity alignment with a fixed Laplacian,
//!   `dv_i = −(λ/N)(Aṽ)_i dt − (σ_i/N)(Aṽ)_i dB_i`,
//! * the full Cucker–Smale system where positions drive the rates,
//!   `dx_i = v_i dt`, `dv_i = (λ/N)Σ_j ψ_ij(ṽ_j − ṽ_i) dt + (σ_i/N)Σ_j ψ_ij(ṽ_j − ṽ_i) dB_i`.

use crate::engine::SdeSystem;
use crate::error::{check_len, invalid, Result};
use crate::laplacian::{build_laplacian, fill_rates, Laplacian, RateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dgbm,
    Gbm,
    CsFixed,
    CsFull,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dgbm => "dgbm",
            ModelKind::Gbm => "gbm",
            ModelKind::CsFixed => "cs-fixed",
            ModelKind::CsFull => "cs-full",
        }
    }
}

/// Which positions the full model feeds into the communication rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatePositions {
    /// `ψ(|x̃_i − x̃_j|)`: agents react to lagged perceptions.
    #[default]
    Delayed,
    /// `ψ(|x_i − x_j|)`.
    Current,
}

/// Fully specified model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_agents: usize,
    /// Spatial dimension per agent.
    pub dim: usize,
    pub lambda: f64,
    /// Per-agent noise strengths.
    pub sigma: Vec<f64>,
    /// Rate exponent (full model only).
    pub beta: f64,
    /// Fixed rates; `None` means all-to-all unit rates.
    pub rates: Option<RateMatrix>,
    pub rate_positions: RatePositions,
    /// `n_agents × dim` constant pre-history of the velocities.
    pub initial_v: Vec<f64>,
    /// `n_agents × dim` constant pre-history of the positions (full model).
    pub initial_x: Vec<f64>,
}

/// `−1` for the first half of the agents and `+1` for the second half.
pub fn split_initial_data(n: usize) -> Result<Vec<f64>> {
    if n == 0 || !n.is_multiple_of(2) {
        return invalid(format!(
            "split initial datum needs an even agent count, got {n}"
        ));
    }
    let k = n / 2;
    Ok((0..n).map(|i| if i < k { -1.0 } else { 1.0 }).collect())
}

impl ModelSpec {
    /// `dw = −λ w̃ dt + σ w̃ dB`, `w ≡ 1` on `(−τ, 0]`.
    pub fn dgbm(lambda: f64, sigma: f64) -> Self {
        Self::scalar(ModelKind::Dgbm, lambda, sigma)
    }

    /// `dv = λ ṽ dt + σ ṽ dB`, `v ≡ 1` on `(−τ, 0]`.
    pub fn gbm(lambda: f64, sigma: f64) -> Self {
        Self::scalar(ModelKind::Gbm, lambda, sigma)
    }

    fn scalar(kind: ModelKind, lambda: f64, sigma: f64) -> Self {
        Self {
            kind,
            n_agents: 1,
            dim: 1,
            lambda,
            sigma: vec![sigma],
            beta: 0.0,
            rates: None,
            rate_positions: RatePositions::Delayed,
            initial_v: vec![1.0],
            initial_x: Vec::new(),
        }
    }

    /// Alignment with fixed rates (complete unit rates when `rates` is `None`)
    /// and the split initial datum.
    pub fn cs_fixed(n: usize, lambda: f64, sigma: f64, rates: Option<RateMatrix>) -> Result<Self> {
        Ok(Self {
            kind: ModelKind::CsFixed,
            n_agents: n,
            dim: 1,
            lambda,
            sigma: vec![sigma; n],
            beta: 0.0,
            rates,
            rate_positions: RatePositions::Delayed,
            initial_v: split_initial_data(n)?,
            initial_x: Vec::new(),
        })
    }

    /// Full model with the split velocity datum and all agents at the origin.
    pub fn cs_full(n: usize, lambda: f64, sigma: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            kind: ModelKind::CsFull,
            n_agents: n,
            dim: 1,
            lambda,
            sigma: vec![sigma; n],
            beta,
            rates: None,
            rate_positions: RatePositions::Delayed,
            initial_v: split_initial_data(n)?,
            initial_x: vec![0.0; n],
        })
    }

    /// Sets a uniform noise strength for every agent.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma.iter_mut().for_each(|s| *s = sigma);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return invalid(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be non-negative, got {}", self.beta));
        }
        if self.dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if self.sigma.iter().any(|s| !s.is_finite()) {
            return invalid("noise strengths must be finite");
        }
        let n = self.n_agents;
        check_len(n, self.sigma.len())?;
        check_len(n * self.dim, self.initial_v.len())?;
        match self.kind {
            ModelKind::Dgbm | ModelKind::Gbm => {
                if n != 1 || self.dim != 1 {
                    return invalid("scalar models have exactly one agent in one dimension");
                }
            }
            ModelKind::CsFixed | ModelKind::CsFull => {
                if n < 2 {
                    return invalid(format!("alignment models need at least 2 agents, got {n}"));
                }
                if let Some(r) = &self.rates {
                    if self.kind == ModelKind::CsFull {
                        return invalid("the full model derives its rates from positions");
                    }
                    check_len(n, r.n())?;
                }
                if self.kind == ModelKind::CsFull {
                    check_len(n * self.dim, self.initial_x.len())?;
                }
            }
        }
        Ok(())
    }

    /// Validates the spec and prepares it for integration.
    pub fn system(&self) -> Result<ModelSystem> {
        self.validate()?;
        let laplacian = match self.kind {
            ModelKind::CsFixed => Some(match &self.rates {
                Some(r) => build_laplacian(r),
                None => Laplacian::complete(self.n_agents)?,
            }),
            _ => None,
        };
        Ok(ModelSystem {
            spec: self.clone(),
            laplacian,
        })
    }

    /// Number of state components holding velocities.
    pub fn velocity_offset(&self) -> usize {
        match self.kind {
            ModelKind::CsFull => self.n_agents * self.dim,
            _ => 0,
        }
    }
}

/// `(drift, diffusion) = (−λ w̃, σ w̃)`.
pub fn dgbm_rhs(delayed_w: f64, lambda: f64, sigma: f64) -> (f64, f64) {
    (-lambda * delayed_w, sigma * delayed_w)
}

/// Drift `−(λ/N)(Aṽ)_i` and diffusion `−(σ_i/N)(Aṽ)_i` of the fixed-rate system.
///
/// Both terms are `(·/N)Σ_j ψ_ij(ṽ_j − ṽ_i)`, so paths coincide with the full
/// model at `β = 0`. Flipping the noise sign would not change the law.
pub fn cs_fixed_rhs(
    delayed_v: &[f64],
    lap: &Laplacian,
    lambda: f64,
    sigma: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = lap.n();
    check_len(n, delayed_v.len())?;
    check_len(n, sigma.len())?;
    let g = lap.apply(delayed_v)?;
    let nf = n as f64;
    let drift = g.iter().map(|gi| -lambda / nf * gi).collect();
    let diffusion = g.iter().zip(sigma).map(|(gi, s)| -s / nf * gi).collect();
    Ok((drift, diffusion))
}

/// Right-hand side of the full system in one dimension.
///
/// Returns `(x_drift, v_drift, v_diffusion)`; positions move with the current
/// velocities while the alignment terms use the delayed state.
pub fn cs_full_rhs(
    rate_x: &[f64],
    delayed_v: &[f64],
    current_v: &[f64],
    lambda: f64,
    sigma: &[f64],
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = rate_x.len();
    check_len(n, delayed_v.len())?;
    check_len(n, current_v.len())?;
    check_len(n, sigma.len())?;
    let mut psi = vec![1.0; n * n];
    fill_rates(rate_x, 1, beta, &mut psi);
    let mut v_drift = vec![0.0; n];
    let mut v_diffusion = vec![0.0; n];
    alignment_terms(
        &psi,
        delayed_v,
        1,
        lambda,
        sigma,
        &mut v_drift,
        &mut v_diffusion,
    );
    Ok((current_v.to_vec(), v_drift, v_diffusion))
}

/// `drift_i = (λ/N)Σ_j ψ_ij(v_j − v_i)` and `diffusion_i = (σ_i/N)Σ_j ψ_ij(v_j − v_i)`
/// for `n` agents with `dim` components each.
fn alignment_terms(
    psi: &[f64],
    v: &[f64],
    dim: usize,
    lambda: f64,
    sigma: &[f64],
    drift: &mut [f64],
    diffusion: &mut [f64],
) {
    let n = sigma.len();
    let nf = n as f64;
    for i in 0..n {
        for k in 0..dim {
            let vi = v[i * dim + k];
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    acc += psi[i * n + j] * (v[j * dim + k] - vi);
                }
            }
            drift[i * dim + k] = lambda / nf * acc;
            diffusion[i * dim + k] = sigma[i] / nf * acc;
        }
    }
}

/// A validated [`ModelSpec`] ready for the integrator.
#[derive(Debug, Clone)]
pub struct ModelSystem {
    spec: ModelSpec,
    laplacian: Option<Laplacian>,
}

impl ModelSystem {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Laplacian of the fixed-rate system.
    pub fn laplacian(&self) -> Option<&Laplacian> {
        self.laplacian.as_ref()
    }

    /// Velocity block of a state vector.
    pub fn velocities<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[self.spec.velocity_offset()..]
    }

    /// Position block of a state vector (full model only).
    pub fn positions<'a>(&self, state: &'a [f64]) -> Option<&'a [f64]> {
        (self.spec.kind == ModelKind::CsFull).then(|| &state[..self.spec.velocity_offset()])
    }
}

#[derive(Debug, Default)]
pub struct ModelWorkspace {
    buf: Vec<f64>,
    psi: Vec<f64>,
}

impl SdeSystem for ModelSystem {
    type Workspace = ModelWorkspace;

    fn width(&self) -> usize {
        let s = &self.spec;
        match s.kind {
            ModelKind::CsFull => 2 * s.n_agents * s.dim,
            _ => s.n_agents * s.dim,
        }
    }

    fn noise_channels(&self) -> usize {
        self.spec.n_agents
    }

    fn noise_dim(&self) -> usize {
        self.spec.dim
    }

    fn noise_offset(&self) -> usize {
        self.spec.velocity_offset()
    }

    fn is_deterministic(&self) -> bool {
        self.spec.sigma.iter().all(|&s| s == 0.0)
    }

    fn initial_state(&self) -> Vec<f64> {
        let s = &self.spec;
        match s.kind {
            ModelKind::CsFull => [s.initial_x.as_slice(), s.initial_v.as_slice()].concat(),
            _ => s.initial_v.clone(),
        }
    }

    fn workspace(&self) -> ModelWorkspace {
        let n = self.spec.n_agents;
        ModelWorkspace {
            buf: vec![0.0; n * self.spec.dim],
            psi: vec![1.0; n * n],
        }
    }

    fn coefficients(
        &self,
        current: &[f64],
        delayed: &[f64],
        drift: &mut [f64],
        diffusion: &mut [f64],
        ws: &mut ModelWorkspace,
    ) {
        let s = &self.spec;
        match s.kind {
            ModelKind::Dgbm => {
                let (f, g) = dgbm_rhs(delayed[0], s.lambda, s.sigma[0]);
                drift[0] = f;
                diffusion[0] = g;
            }
            ModelKind::Gbm => {
                drift[0] = s.lambda * delayed[0];
                diffusion[0] = s.sigma[0] * delayed[0];
            }
            ModelKind::CsFixed => {
                let lap = self
                    .laplacian
                    .as_ref()
                    .expect("fixed model has a Laplacian");
                lap.apply_into(delayed, s.dim, &mut ws.buf);
                let nf = s.n_agents as f64;
                let d = s.dim;
                for (i, sigma) in s.sigma.iter().enumerate() {
                    for k in i * d..(i + 1) * d {
                        drift[k] = -s.lambda / nf * ws.buf[k];
                        diffusion[k] = -sigma / nf * ws.buf[k];
                    }
                }
            }
            ModelKind::CsFull => {
                let off = s.velocity_offset();
                let rate_x = match s.rate_positions {
                    RatePositions::Delayed => &delayed[..off],
                    RatePositions::Current => &current[..off],
                };
                fill_rates(rate_x, s.dim, s.beta, &mut ws.psi);
                drift[..off].copy_from_slice(&current[off..]);
                diffusion[..off].fill(0.0);
                alignment_terms(
                    &ws.psi,
                    &delayed[off..],
                    s.dim,
                    s.lambda,
                    &s.sigma,
                    &mut drift[off..],
                    &mut diffusion[off..],
                );
            }
        }
    }
}
