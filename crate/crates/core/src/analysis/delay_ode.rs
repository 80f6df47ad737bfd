//! The scalar delay equation `r'(t) = −λ r(t − τ)` with `r(0) = 1` and `r ≡ 0` before 0.
//!
//! Its solution is the fundamental solution of the linear delayed system
//! and its square integral decides the mean-square criterion for delayed
//! geometric Brownian motion.

use crate::error::{invalid, Result};

/// Tolerance used when comparing `λτ` with the regime thresholds `1/e` and `π/2`.
pub const REGIME_TOL: f64 = 1e-12;

/// Fraction of the horizon at the end used to check that the integrand has
/// decayed.
pub const L2_TAIL_FRACTION: f64 = 0.1;

/// Largest share of the integral allowed in the tail for a conclusive verdict.
pub const L2_TAIL_TOL: f64 = 1e-6;

/// Trailing terms below this fraction of the largest term of a piece are dropped.
const POLY_TRUNCATION: f64 = 1e-17;

/// Qualitative behaviour of `r` as a function of `λτ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeRegime {
    /// `0 ≤ λτ ≤ 1/e`: monotone decay.
    Monotone,
    /// `1/e < λτ < π/2`: decaying oscillation.
    DampedOscillation,
    /// `λτ = π/2`: undamped oscillation.
    Periodic,
    /// `λτ > π/2`: growing oscillation.
    Divergent,
}

impl OdeRegime {
    pub fn name(self) -> &'static str {
        match self {
            Self::Monotone => "monotone",
            Self::DampedOscillation => "damped-oscillation",
            Self::Periodic => "periodic",
            Self::Divergent => "divergent",
        }
    }

    /// True when `r ∈ L¹ ∩ L²`.
    pub fn decays(self) -> bool {
        matches!(self, Self::Monotone | Self::DampedOscillation)
    }
}

pub fn classify_delayed_ode(lambda: f64, tau: f64) -> Result<OdeRegime> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return invalid(format!("delay must be non-negative, got {tau}"));
    }
    let lt = lambda * tau;
    let e_inv = (-1.0f64).exp();
    let half_pi = std::f64::consts::FRAC_PI_2;
    Ok(if lt <= e_inv + REGIME_TOL {
        OdeRegime::Monotone
    } else if (lt - half_pi).abs() <= REGIME_TOL {
        OdeRegime::Periodic
    } else if lt < half_pi {
        OdeRegime::DampedOscillation
    } else {
        OdeRegime::Divergent
    })
}

/// Piecewise polynomial representation of `r`: on `[kτ, (k+1)τ]`,
/// `r(t) = Σ_j c_kj (t − kτ)^j`.
///
/// Each piece follows from the previous one by the method of steps,
/// `p_k(s) = p_{k−1}(τ) − λ ∫_0^s p_{k−1}`. Working with local polynomials
/// avoids the cancellation of the global alternating series.
#[derive(Debug, Clone)]
struct StepPolynomials {
    lambda: f64,
    tau: f64,
    pieces: Vec<Vec<f64>>,
}

impl StepPolynomials {
    fn new(lambda: f64, tau: f64) -> Self {
        Self {
            lambda,
            tau,
            pieces: vec![vec![1.0]],
        }
    }

    fn horner(c: &[f64], s: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck)
    }

    fn extend_to(&mut self, piece: usize) {
        while self.pieces.len() <= piece {
            let prev = self.pieces.last().expect("non-empty");
            let start = Self::horner(prev, self.tau);
            let mut next = Vec::with_capacity(prev.len() + 1);
            next.push(start);
            for (j, &c) in prev.iter().enumerate() {
                next.push(-self.lambda * c / (j as f64 + 1.0));
            }
            let mut tau_pow = 1.0;
            let mut size = 0.0f64;
            for c in &next {
                size = size.max((c * tau_pow).abs());
                tau_pow *= self.tau;
            }
            let cutoff = POLY_TRUNCATION * size;
            tau_pow = self.tau.powi(next.len() as i32 - 1);
            while next.len() > 1 {
                let last = *next.last().expect("non-empty");
                if (last * tau_pow).abs() >= cutoff {
                    break;
                }
                next.pop();
                tau_pow /= self.tau;
            }
            self.pieces.push(next);
        }
    }

    fn eval(&mut self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let k = (t / self.tau).floor() as usize;
        self.extend_to(k);
        Self::horner(&self.pieces[k], t - k as f64 * self.tau)
    }
}

/// Evaluates `r` at `t_k = k·dt`, `k = 0..=n_steps`.
pub fn fundamental_solution(lambda: f64, tau: f64, dt: f64, n_steps: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return invalid(format!("delay must be non-negative, got {tau}"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let times = (0..=n_steps).map(|k| k as f64 * dt);
    if tau == 0.0 {
        return Ok(times.map(|t| (-lambda * t).exp()).collect());
    }
    let mut poly = StepPolynomials::new(lambda, tau);
    Ok(times.map(|t| poly.eval(t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L2Verdict {
    /// `∫ r² < 1/σ²`.
    Satisfied,
    /// `∫ r² ≥ 1/σ²`, including the case of an infinite integral.
    NotSatisfied,
    /// The integrand has not decayed by the end of the horizon.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Report {
    pub regime: OdeRegime,
    /// Trapezoid estimate of `∫_0^{t_max} r²`, infinite when `r ∉ L²`.
    pub integral: f64,
    /// `1/σ²`.
    pub threshold: f64,
    /// Share of the integral accumulated over the last tenth of the horizon.
    pub tail_fraction: f64,
    pub verdict: L2Verdict,
}

/// Mean-square criterion for delayed geometric Brownian motion:
/// `E w(t)² → 0` iff `∫_0^∞ r² < 1/σ²`.
pub fn l2_criterion(lambda: f64, tau: f64, sigma: f64, t_max: f64, dt: f64) -> Result<L2Report> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("the L2 criterion needs sigma > 0, got {sigma}"));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return invalid(format!("horizon must be positive, got {t_max}"));
    }
    let regime = classify_delayed_ode(lambda, tau)?;
    let threshold = 1.0 / (sigma * sigma);
    if !regime.decays() {
        return Ok(L2Report {
            regime,
            integral: f64::INFINITY,
            threshold,
            tail_fraction: 1.0,
            verdict: L2Verdict::NotSatisfied,
        });
    }
    let n_steps = (t_max / dt).round() as usize;
    if n_steps < 10 {
        return invalid("horizon must span at least 10 steps");
    }
    let r = fundamental_solution(lambda, tau, dt, n_steps)?;
    let tail_start = n_steps - ((n_steps as f64 * L2_TAIL_FRACTION).round() as usize);
    let trapezoid = |lo: usize, hi: usize| -> f64 {
        let inner: f64 = r[lo + 1..hi].iter().map(|x| x * x).sum();
        dt * (inner + 0.5 * (r[lo] * r[lo] + r[hi] * r[hi]))
    };
    let integral = trapezoid(0, n_steps);
    let tail = trapezoid(tail_start, n_steps);
    let tail_fraction = if integral > 0.0 { tail / integral } else { 0.0 };
    let verdict = if tail_fraction > L2_TAIL_TOL {
        L2Verdict::Inconclusive
    } else if integral < threshold {
        L2Verdict::Satisfied
    } else {
        L2Verdict::NotSatisfied
    };
    Ok(L2Report {
        regime,
        integral,
        threshold,
        tail_fraction,
        verdict,
    })
}
