//! Micro–macro decomposition and the delayed Lyapunov functional.

use crate::error::{check_len, invalid, Result};
use crate::laplacian::Laplacian;

/// Splits `n × dim` velocities into the mean `V_c` and the zero-sum
/// fluctuations `w_i = v_i − V_c`.
pub fn micro_macro(v: &[f64], dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if dim == 0 || v.is_empty() || !v.len().is_multiple_of(dim) {
        return invalid(format!(
            "cannot split {} values into blocks of {dim}",
            v.len()
        ));
    }
    let n = v.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in v.chunks_exact(dim) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let w = v
        .chunks_exact(dim)
        .flat_map(|row| row.iter().zip(&mean).map(|(x, m)| x - m))
        .collect();
    Ok((mean, w))
}

/// Evaluates
/// `L(t) = |w(t)|² + (q/N²)∫_{t−τ}^t |Aw(s)|² ds + (p/N²)∫_{t−τ}^t (s − t + τ)|Aw(s−τ)|² ds`
/// from velocity samples on `[t − 2τ, t]`.
///
/// `window` holds `samples × n·dim` velocities spaced `dt` apart with the
/// newest last; only the final `2m + 1` samples are used, where `m` is the
/// delay in steps. The double integral of the functional has been reduced
/// to a weighted single integral by exchanging the order of integration.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_value(
    window: &[f64],
    n: usize,
    dim: usize,
    dt: f64,
    delay_steps: usize,
    lap: &Laplacian,
    p: f64,
    q: f64,
) -> Result<f64> {
    check_len(n, lap.n())?;
    let width = n * dim;
    if width == 0 || !window.len().is_multiple_of(width) {
        return invalid("window length is not a multiple of the state width");
    }
    let m = delay_steps;
    let samples = window.len() / width;
    if samples < 2 * m + 1 {
        return invalid(format!(
            "Lyapunov functional needs {} samples of history, got {samples}",
            2 * m + 1
        ));
    }
    let tail = &window[(samples - 2 * m - 1) * width..];
    let row = |k: usize| &tail[k * width..(k + 1) * width];

    let (_, w_now) = micro_macro(row(2 * m), dim)?;
    let kinetic: f64 = w_now.iter().map(|x| x * x).sum();
    if m == 0 {
        return Ok(kinetic);
    }

    // A annihilates the mean, so |Aw|² = |Av|².
    let mut buf = vec![0.0; width];
    let mut energy = |k: usize| -> f64 {
        lap.apply_into(row(k), dim, &mut buf);
        buf.iter().map(|x| x * x).sum()
    };
    let g: Vec<f64> = (0..=2 * m).map(&mut energy).collect();

    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        let inner: f64 = (1..m).map(f).sum();
        dt * (inner + 0.5 * (f(0) + f(m)))
    };
    // s = t − τ + j·dt for j = 0..=m
    let first = trap(&|j| g[m + j]);
    let second = trap(&|j| j as f64 * dt * g[j]);
    let n2 = (n * n) as f64;
    Ok(kinetic + q / n2 * first + p / n2 * second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::{build_laplacian, RateMatrix};
    use proptest::prelude::*;

    #[test]
    fn decomposition_examples() {
        let (m, w) = micro_macro(&[-1.0, 1.0], 1).unwrap();
        assert_eq!(m, vec![0.0]);
        assert_eq!(w, vec![-1.0, 1.0]);
        let (m, w) = micro_macro(&[3.0, 3.0, 3.0], 1).unwrap();
        assert_eq!(m, vec![3.0]);
        assert!(w.iter().all(|&x| x == 0.0));
        let (m, w) = micro_macro(&[1.0, 2.0, 3.0, 6.0], 2).unwrap();
        assert_eq!(m, vec![2.0, 4.0]);
        assert_eq!(w, vec![-1.0, -2.0, 1.0, 2.0]);
        assert!(micro_macro(&[], 1).is_err());
    }

    #[test]
    fn constant_split_window() {
        // v ≡ (−1, 1): |w|² = 2, Aw = (−2, 2), |Aw|² = 8
        let lap = Laplacian::complete(2).unwrap();
        let (dt, m) = (0.01, 10);
        let tau = m as f64 * dt;
        let window: Vec<f64> = (0..2 * m + 1).flat_map(|_| [-1.0, 1.0]).collect();
        let (p, q) = (3.0, 0.7);
        let got = lyapunov_value(&window, 2, 1, dt, m, &lap, p, q).unwrap();
        let expected = 2.0 + q / 4.0 * 8.0 * tau + p / 4.0 * 8.0 * tau * tau / 2.0;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn degenerate_cases() {
        let lap = Laplacian::complete(3).unwrap();
        let window = vec![2.0; 3 * 5];
        assert_eq!(
            lyapunov_value(&window, 3, 1, 0.1, 2, &lap, 1.0, 1.0).unwrap(),
            0.0
        );
        let window = [0.0, 1.0, 5.0];
        assert_eq!(
            lyapunov_value(&window, 3, 1, 0.1, 0, &lap, 9.0, 9.0).unwrap(),
            14.0
        );
        let window: Vec<f64> = (0..15).map(|k| k as f64).collect();
        let plain = lyapunov_value(&window, 3, 1, 0.1, 2, &lap, 0.0, 0.0).unwrap();
        assert!((plain - 2.0).abs() < 1e-12);
        assert!(lyapunov_value(&window, 3, 1, 0.1, 3, &lap, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn reconstructs_and_sums_to_zero(v in proptest::collection::vec(-100.0f64..100.0, 1..12)) {
            let (m, w) = micro_macro(&v, 1).unwrap();
            let s: f64 = w.iter().sum();
            prop_assert!(s.abs() < 1e-11);
            for (x, wi) in v.iter().zip(&w) {
                prop_assert!((m[0] + wi - x).abs() < 1e-12);
            }
        }

        #[test]
        fn functional_dominates_kinetic_part(
            vals in proptest::collection::vec(-3.0f64..3.0, 3 * 9),
            rates in proptest::collection::vec(0.01f64..1.0, 3),
            p in 0.0f64..5.0,
            q in 0.0f64..5.0,
        ) {
            let psi = vec![0.0, rates[0], rates[1], rates[0], 0.0, rates[2], rates[1], rates[2], 0.0];
            let lap = build_laplacian(&RateMatrix::new(3, psi).unwrap());
            let l = lyapunov_value(&vals, 3, 1, 0.05, 4, &lap, p, q).unwrap();
            let (_, w) = micro_macro(&vals[8 * 3..], 1).unwrap();
            let kinetic: f64 = w.iter().map(|x| x * x).sum();
            prop_assert!(l >= kinetic - 1e-12);
        }
    }
}
