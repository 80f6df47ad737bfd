use crate::error::{invalid, Result};

/// Relative tolerance for treating a time span as an integer number of steps.
pub const COMMENSURATE_RTOL: f64 = 1e-9;

/// Uniform time grid on `[0, t_end]` with a delay that is a whole number of steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationGrid {
    dt: f64,
    t_end: f64,
    tau: f64,
    n_steps: usize,
    delay_steps: usize,
}

/// Number of whole steps of size `dt` in `span`, if `span` is commensurate.
pub fn whole_steps(span: f64, dt: f64) -> Option<usize> {
    let ratio = span / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= COMMENSURATE_RTOL * rounded.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Rounds `tau` to the nearest multiple of `dt`.
pub fn snap_to_grid(tau: f64, dt: f64) -> f64 {
    (tau / dt).round() * dt
}

impl IntegrationGrid {
    pub fn new(dt: f64, t_end: f64, tau: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return invalid(format!("horizon must be positive, got {t_end}"));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return invalid(format!("delay must be non-negative, got {tau}"));
        }
        let Some(n_steps) = whole_steps(t_end, dt) else {
            return invalid(format!("horizon {t_end} is not a multiple of dt = {dt}"));
        };
        let Some(delay_steps) = whole_steps(tau, dt) else {
            return invalid(format!("delay {tau} is not a multiple of dt = {dt}"));
        };
        Ok(Self {
            dt,
            t_end,
            tau,
            n_steps,
            delay_steps,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Same step and horizon, different delay.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.dt, self.t_end, tau)
    }

    /// First step index of the terminal window `[t_end − length, t_end]`.
    pub fn window_start(&self, length: f64) -> Result<usize> {
        let Some(len_steps) = whole_steps(length, self.dt) else {
            return invalid(format!("window length {length} is not a multiple of dt"));
        };
        if len_steps > self.n_steps {
            return invalid(format!(
                "window of length {length} exceeds the horizon {}",
                self.t_end
            ));
        }
        Ok(self.n_steps - len_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_steps() {
        let g = IntegrationGrid::new(1e-3, 30.0, 1.0).unwrap();
        assert_eq!(g.n_steps(), 30_000);
        assert_eq!(g.delay_steps(), 1_000);
        assert_eq!(g.window_start(1.0).unwrap(), 29_000);
        assert!(g.window_start(31.0).is_err());
    }

    #[test]
    fn rejects_incommensurate_delay() {
        assert!(IntegrationGrid::new(1e-3, 30.0, 0.0015).is_err());
        assert!(IntegrationGrid::new(1e-3, 30.0, std::f64::consts::FRAC_PI_2).is_err());
        let snapped = snap_to_grid(std::f64::consts::FRAC_PI_2, 1e-3);
        assert_eq!(
            IntegrationGrid::new(1e-3, 30.0, snapped)
                .unwrap()
                .delay_steps(),
            1571
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(IntegrationGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(IntegrationGrid::new(0.1, -1.0, 0.0).is_err());
        assert!(IntegrationGrid::new(0.1, 1.0, -0.1).is_err());
    }
}
