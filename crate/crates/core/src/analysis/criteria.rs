//! Sufficient flocking conditions and the constants of the Lyapunov functional.

use crate::error::{invalid, Result};

/// Outcome of the noise and delay conditions for a constant Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlockingCriteriaReport {
    pub lambda: f64,
    pub sigma_max: f64,
    /// `σ_max² < λ`.
    pub noise_ok: bool,
    /// Critical delay; absent when the noise condition fails.
    pub tau_c: Option<f64>,
    /// `κ_max = σ_max / λ`.
    pub kappa_max: f64,
    /// `λ·κ_max² < 1`, the same condition written through `κ_max`.
    pub kappa_form_ok: bool,
    /// Critical delay recomputed from the `κ_max` form.
    pub kappa_tau_c: Option<f64>,
    /// Alternative normalization with constant 1/8 and halved `σ²` terms,
    /// `λ⁻²(−σ²/2 + √(σ⁴/4 + (λ − σ²)²/8))`. Reported for comparison only.
    pub variant_tau_c: Option<f64>,
}

impl FlockingCriteriaReport {
    /// True when `0 ≤ tau < tau_c`.
    pub fn admits_delay(&self, tau: f64) -> bool {
        self.tau_c.is_some_and(|tc| tau >= 0.0 && tau < tc)
    }
}

/// Critical delay `τ_c = λ⁻²(−σ² + √(σ⁴ + (λ − σ²)²/12))` below which the
/// constant-matrix system is guaranteed to flock.
pub fn critical_delay(lambda: f64, sigma_max: f64) -> Result<FlockingCriteriaReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !(sigma_max >= 0.0 && sigma_max.is_finite()) {
        return invalid(format!("sigma_max must be non-negative, got {sigma_max}"));
    }
    let s2 = sigma_max * sigma_max;
    let noise_ok = s2 < lambda;
    let kappa = sigma_max / lambda;
    let kappa_form_ok = lambda * kappa * kappa < 1.0;
    debug_assert!(
        noise_ok == kappa_form_ok || (s2 - lambda).abs() <= 4.0 * f64::EPSILON * lambda,
        "noise condition and its kappa form disagree away from the boundary"
    );
    let noise_ok = noise_ok && kappa_form_ok;

    let tau_c = noise_ok
        .then(|| (-s2 + (s2 * s2 + (lambda - s2).powi(2) / 12.0).sqrt()) / (lambda * lambda));
    let kappa_tau_c = noise_ok.then(|| {
        let k2 = kappa * kappa;
        -k2 + (k2 * k2 + (1.0 - lambda * k2).powi(2) / (12.0 * lambda * lambda)).sqrt()
    });
    let variant_tau_c = noise_ok.then(|| {
        (-s2 / 2.0 + (s2 * s2 / 4.0 + (lambda - s2).powi(2) / 8.0).sqrt()) / (lambda * lambda)
    });
    Ok(FlockingCriteriaReport {
        lambda,
        sigma_max,
        noise_ok,
        tau_c,
        kappa_max: kappa,
        kappa_form_ok,
        kappa_tau_c,
        variant_tau_c,
    })
}

/// Largest delay for which delayed geometric Brownian motion is guaranteed to
/// have vanishing mean square, or `None` when `σ² ≥ 2λ`.
pub fn dgbm_bound(lambda: f64, sigma: f64) -> Result<Option<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let s2 = sigma * sigma;
    if !(s2 < 2.0 * lambda) {
        return Ok(None);
    }
    let root = (4.0 * s2 * s2 + 2.0 * (2.0 * lambda - s2).powi(2)).sqrt();
    Ok(Some((-2.0 * s2 + root) / (4.0 * lambda * lambda)))
}

/// Both parts of the delayed-GBM condition: `σ² < 2λ` and `τ` below the bound.
pub fn dgbm_condition(lambda: f64, sigma: f64, tau: f64) -> Result<bool> {
    Ok(dgbm_bound(lambda, sigma)?.is_some_and(|b| tau < b || tau == 0.0))
}

/// Constants of the Lyapunov functional and the resulting decay margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    pub lambda: f64,
    pub sigma_max: f64,
    pub tau: f64,
    pub delta: f64,
    /// `p = 6λδ(λ²τ + 2σ_max²)`.
    pub p: f64,
    /// `q = σ_max² + pτ`.
    pub q: f64,
    /// Lipschitz constant of `A(t)` in the Frobenius norm (0 for constant matrices).
    pub lipschitz: f64,
    /// Lower bound on the Fiedler number.
    pub ell: f64,
    /// `−2λ + λ/δ + 2q(Lτ/ℓ + 1)`.
    pub margin: f64,
}

impl LyapunovParams {
    pub fn flocking_sufficient(&self) -> bool {
        self.margin < 0.0
    }

    /// `ε = −margin` when the functional decays.
    pub fn decay_rate(&self) -> Option<f64> {
        self.flocking_sufficient().then_some(-self.margin)
    }
}

/// Canonical `δ = λ/(λ − σ_max²)`; it maximizes the admissible delay for a
/// constant matrix and is the midpoint choice `δ⁻¹ = (λ − σ_max²)/λ` otherwise.
pub fn default_delta(lambda: f64, sigma_max: f64) -> Option<f64> {
    let gap = lambda - sigma_max * sigma_max;
    (lambda > 0.0 && gap > 0.0).then(|| lambda / gap)
}

pub fn lyapunov_params(
    lambda: f64,
    sigma_max: f64,
    tau: f64,
    delta: f64,
    lipschitz: f64,
    ell: f64,
) -> Result<LyapunovParams> {
    if !(lambda > 0.0) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !(delta > 0.0) {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    if !(sigma_max >= 0.0 && tau >= 0.0 && lipschitz >= 0.0) {
        return invalid("sigma_max, tau and the Lipschitz constant must be non-negative");
    }
    if lipschitz > 0.0 && !(ell > 0.0) {
        return invalid(format!(
            "Fiedler lower bound must be positive when L > 0, got {ell}"
        ));
    }
    let s2 = sigma_max * sigma_max;
    let p = 6.0 * lambda * delta * (lambda * lambda * tau + 2.0 * s2);
    let q = s2 + p * tau;
    let coupling = if lipschitz > 0.0 {
        lipschitz * tau / ell
    } else {
        0.0
    };
    let margin = -2.0 * lambda + lambda / delta + 2.0 * q * (coupling + 1.0);
    Ok(LyapunovParams {
        lambda,
        sigma_max,
        tau,
        delta,
        p,
        q,
        lipschitz,
        ell,
        margin,
    })
}
