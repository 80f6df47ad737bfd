//! Communication rates, the alignment Laplacian and its spectrum.
//!
//! Matrices are stored densely in row-major order. Agent counts in every
//! experiment are small (two to a few hundred), so a dense cyclic Jacobi
//! eigensolver is sufficient.

use crate::error::{check_len, invalid, Error, Result};

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Relative off-diagonal mass at which the Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-12;

/// Communication rate `ψ(s) = (1 + s²)^(-β)`.
pub fn cs_rate(distance: f64, beta: f64) -> f64 {
    let s2 = distance * distance;
    if beta == 0.0 {
        1.0
    } else if beta == 1.0 {
        1.0 / (1.0 + s2)
    } else if beta == 0.5 {
        1.0 / (1.0 + s2).sqrt()
    } else {
        (-beta * s2.ln_1p()).exp()
    }
}

/// Symmetric matrix of pairwise rates with entries in `(0, 1]`.
///
/// Diagonal entries carry no meaning and are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    psi: Vec<f64>,
}

impl RateMatrix {
    pub fn new(n: usize, psi: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return invalid(format!("rate matrix needs at least 2 agents, got {n}"));
        }
        check_len(n * n, psi.len())?;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let p = psi[i * n + j];
                if !(p > 0.0 && p <= 1.0) {
                    return invalid(format!("rate psi[{i}][{j}] = {p} outside (0, 1]"));
                }
                if p != psi[j * n + i] {
                    return invalid(format!(
                        "rate matrix not symmetric at psi[{i}][{j}] = {p} vs psi[{j}][{i}] = {}",
                        psi[j * n + i]
                    ));
                }
            }
        }
        Ok(Self { n, psi })
    }

    /// All-to-all unit rates (`ψ ≡ 1`).
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, vec![1.0; n * n])
    }

    /// Rates `ψ(|x_i − x_j|)` for agents at `positions` (row-major `n × dim`).
    pub fn from_positions(positions: &[f64], dim: usize, beta: f64) -> Result<Self> {
        if dim == 0 || !positions.len().is_multiple_of(dim) {
            return invalid("positions length is not a multiple of the dimension");
        }
        let n = positions.len() / dim;
        let mut psi = vec![1.0; n * n];
        fill_rates(positions, dim, beta, &mut psi);
        Self::new(n, psi)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.psi[i * self.n + j]
    }
}

/// Writes `ψ(|x_i − x_j|)` into the off-diagonal of `psi` (row-major `n × n`).
pub(crate) fn fill_rates(positions: &[f64], dim: usize, beta: f64, psi: &mut [f64]) {
    let n = positions.len() / dim;
    for i in 0..n {
        let xi = &positions[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            let xj = &positions[j * dim..(j + 1) * dim];
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            let p = cs_rate(d2.sqrt(), beta);
            psi[i * n + j] = p;
            psi[j * n + i] = p;
        }
    }
}

/// Graph Laplacian `A` with `A_ij = −ψ_ij` off the diagonal and zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    n: usize,
    a: Vec<f64>,
    /// Common off-diagonal rate when every pair communicates at the same rate.
    uniform_rate: Option<f64>,
}

/// Builds the Laplacian of a validated rate matrix.
pub fn build_laplacian(rates: &RateMatrix) -> Laplacian {
    let n = rates.n;
    let mut a = vec![0.0; n * n];
    let first = rates.get(0, 1);
    let mut uniform = true;
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let p = rates.get(i, j);
                uniform &= p == first;
                a[i * n + j] = -p;
                diag += p;
            }
        }
        a[i * n + i] = diag;
    }
    Laplacian {
        n,
        a,
        uniform_rate: uniform.then_some(first),
    }
}

impl Laplacian {
    /// Laplacian of the complete graph with unit rates.
    pub fn complete(n: usize) -> Result<Self> {
        Ok(build_laplacian(&RateMatrix::complete(n)?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    /// `out = A·u` where `u` and `out` hold `n` agents of `dim` components each.
    pub fn apply_into(&self, u: &[f64], dim: usize, out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(u.len(), n * dim);
        debug_assert_eq!(out.len(), n * dim);
        if let Some(rate) = self.uniform_rate {
            // A·u = rate·(n·u − Σu)
            for k in 0..dim {
                let sum: f64 = (0..n).map(|i| u[i * dim + k]).sum();
                for i in 0..n {
                    out[i * dim + k] = rate * (n as f64 * u[i * dim + k] - sum);
                }
            }
            return;
        }
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            for k in 0..dim {
                out[i * dim + k] = row
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * u[j * dim + k])
                    .sum();
            }
        }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, u.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_into(u, 1, &mut out);
        Ok(out)
    }

    /// Bilinear form `uᵀ·A·w`.
    pub fn quadratic_form(&self, u: &[f64], w: &[f64]) -> Result<f64> {
        check_len(self.n, u.len())?;
        check_len(self.n, w.len())?;
        Ok(self
            .a
            .chunks_exact(self.n)
            .zip(u)
            .map(|(row, ui)| ui * row.iter().zip(w).map(|(a, x)| a * x).sum::<f64>())
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn spectrum(&self) -> Result<SpectralSummary> {
        let eigenvalues = symmetric_eigenvalues(&self.a, self.n)?;
        Ok(SpectralSummary::from_sorted(eigenvalues))
    }
}

/// Eigenvalues of a Laplacian in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    /// Second smallest eigenvalue (algebraic connectivity).
    pub fiedler: f64,
    pub max_eig: f64,
}

impl SpectralSummary {
    fn from_sorted(eigenvalues: Vec<f64>) -> Self {
        let fiedler = eigenvalues[1];
        let max_eig = *eigenvalues.last().expect("n >= 2");
        Self {
            eigenvalues,
            fiedler,
            max_eig,
        }
    }
}

pub fn spectrum(lap: &Laplacian) -> Result<SpectralSummary> {
    lap.spectrum()
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations,
/// returned in ascending order.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Result<Vec<f64>> {
    check_len(n * n, matrix.len())?;
    let mut a = matrix.to_vec();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let target = JACOBI_TOL * norm;
    let mut converged = off(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal mass {:e})",
                off(&a)
            )));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
        sweeps += 1;
        converged = off(&a) <= target;
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_rates(n: usize, entries: &[f64]) -> RateMatrix {
        let mut psi = vec![1.0; n * n];
        let mut it = entries.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = *it.next().unwrap();
                psi[i * n + j] = p;
                psi[j * n + i] = p;
            }
        }
        RateMatrix::new(n, psi).unwrap()
    }

    fn rates_strategy() -> impl Strategy<Value = RateMatrix> {
        (2usize..=10).prop_flat_map(|n| {
            prop::collection::vec(1e-3f64..=1.0, n * (n - 1) / 2)
                .prop_map(move |e| random_rates(n, &e))
        })
    }

    #[test]
    fn two_agent_unit_laplacian() {
        let lap = Laplacian::complete(2).unwrap();
        assert_eq!(lap.as_slice(), &[1.0, -1.0, -1.0, 1.0]);
        let spec = lap.spectrum().unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-14);
        assert!((spec.fiedler - 2.0).abs() < 1e-12);
    }

    #[test]
    fn three_agent_unit_laplacian() {
        let lap = Laplacian::complete(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 } else { -1.0 };
                assert_eq!(lap.get(i, j), expected);
            }
        }
    }

    #[test]
    fn complete_graph_fiedler_equals_n() {
        let lap = Laplacian::complete(20).unwrap();
        let spec = lap.spectrum().unwrap();
        assert!((spec.fiedler - 20.0).abs() < 1e-10);
        assert!((spec.max_eig - 20.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_asymmetric_rates() {
        let err = RateMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).unwrap_err();
        assert!(err.to_string().contains("psi[0][1]"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_rates() {
        assert!(RateMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(RateMatrix::new(2, vec![1.0, 1.5, 1.5, 1.0]).is_err());
        // diagonal is ignored
        assert!(RateMatrix::new(2, vec![7.0, 0.5, 0.5, -3.0]).is_ok());
    }

    #[test]
    fn quadratic_form_examples() {
        let lap = Laplacian::complete(2).unwrap();
        let e = [1.0, 1.0];
        assert_eq!(lap.quadratic_form(&e, &e).unwrap(), 0.0);
        // brute-force: A·w = (-2, 2), wᵀ(A·w) = 2 + 2
        let w = [-1.0, 1.0];
        let aw: Vec<f64> = (0..2)
            .map(|i| (0..2).map(|j| lap.get(i, j) * w[j]).sum())
            .collect();
        let brute: f64 = w.iter().zip(&aw).map(|(a, b)| a * b).sum();
        assert_eq!(brute, 4.0);
        assert_eq!(lap.quadratic_form(&w, &w).unwrap(), brute);
        assert!(lap.quadratic_form(&w, &[1.0]).is_err());
    }

    #[test]
    fn cs_rate_values() {
        assert_eq!(cs_rate(0.0, 3.7), 1.0);
        assert_eq!(cs_rate(1.0, 1.0), 0.5);
        let direct = 1.0 / 10f64.sqrt();
        let log_domain = (-0.5 * 10f64.ln()).exp();
        assert!((cs_rate(3.0, 0.5) - direct).abs() < 1e-15);
        assert!((cs_rate(3.0, 0.5) - log_domain).abs() < 1e-15);
        assert!((cs_rate(3.0, 0.7) - 10f64.powf(-0.7)).abs() < 1e-15);
        assert_eq!(cs_rate(5.0, 0.0), 1.0);
    }

    #[test]
    fn non_uniform_apply_matches_dense() {
        let rates = random_rates(4, &[0.2, 0.9, 0.4, 0.7, 0.3, 1.0]);
        let lap = build_laplacian(&rates);
        assert!(lap.uniform_rate.is_none());
        let u = [0.3, -1.2, 2.0, 0.5];
        let got = lap.apply(&u).unwrap();
        for (i, g) in got.iter().enumerate() {
            let want: f64 = (0..4).map(|j| lap.get(i, j) * u[j]).sum();
            assert!((g - want).abs() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn laplacian_structure(rates in rates_strategy()) {
            let lap = build_laplacian(&rates);
            let n = lap.n();
            for i in 0..n {
                let row: f64 = (0..n).map(|j| lap.get(i, j)).sum();
                prop_assert!(row.abs() <= 1e-12 * n as f64);
                prop_assert!(lap.get(i, i) >= 0.0);
                for j in 0..n {
                    prop_assert_eq!(lap.get(i, j), lap.get(j, i));
                    if i != j { prop_assert!(lap.get(i, j) <= 0.0); }
                }
            }
            let e = vec![1.0; n];
            let ae = lap.apply(&e).unwrap();
            prop_assert!(ae.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-12 * n as f64);
        }

        #[test]
        fn spectrum_bounds(rates in rates_strategy()) {
            let lap = build_laplacian(&rates);
            let n = lap.n() as f64;
            let spec = lap.spectrum().unwrap();
            let tol = 1e-9 * n;
            prop_assert!(spec.eigenvalues[0].abs() <= tol);
            prop_assert!(spec.max_eig <= 2.0 * (n - 1.0) + tol);
            prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let trace: f64 = (0..lap.n()).map(|i| lap.get(i, i)).sum();
            let sum: f64 = spec.eigenvalues.iter().sum();
            prop_assert!((trace - sum).abs() <= 1e-9 * trace.max(1.0));
        }

        #[test]
        fn cs_rate_monotone(s in 0.0f64..50.0, ds in 1e-3f64..5.0, beta in 1e-2f64..3.0) {
            let a = cs_rate(s, beta);
            let b = cs_rate(s + ds, beta);
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(b < a);
            prop_assert_eq!(cs_rate(s, 0.0), 1.0);
        }
    }
}
