//! Truncation bias of Monte-Carlo moments of geometric Brownian motion.
//!
//! With `2λ = σ²` the process `v = exp(z)` solves `dv = λv dt + σv dB` where
//! `dz = √(2λ) dB`. A sampler that never produces `|z(t)| > η√(4λt)` sees
//! the truncated density and underestimates `E v(t)² = e^{4λt}` by
//! `[erfc(√(4λt) − η) − erfc(√(4λt) + η)] / (2 erf η)`.

use rayon::prelude::*;

use crate::engine::{NoiseStream, SeedMaterial};
use crate::error::{invalid, Result};

/// Beyond this argument `erfc` is evaluated through its asymptotic series in
/// log space (`erfc(26) ≈ 6e-296` is close to the smallest normal double).
const LOG_ERFC_SERIES_FROM: f64 = 26.0;

const PATH_CHUNK: usize = 256;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `ln erfc(x)`, finite for every finite `x`.
pub fn log_erfc(x: f64) -> f64 {
    if x < LOG_ERFC_SERIES_FROM {
        return erfc(x).ln();
    }
    // erfc(x) = e^{−x²}/(x√π) · Σ_n (−1)^n (2n−1)!! / (2x²)^n
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut series = 1.0;
    for n in 1..=8 {
        term *= -((2 * n - 1) as f64) * inv;
        series += term;
    }
    -x * x - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
}

fn check_ratio_args(lambda: f64, t: f64, eta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    if !(eta > 0.0) {
        return invalid(format!("truncation level must be positive, got {eta}"));
    }
    Ok(())
}

/// Natural logarithm of [`gbm_truncation_ratio`], accurate far beyond the
/// range where the ratio itself underflows.
pub fn log_gbm_truncation_ratio(lambda: f64, t: f64, eta: f64) -> Result<f64> {
    check_ratio_args(lambda, t, eta)?;
    if eta.is_infinite() {
        return Ok(0.0);
    }
    let r = (4.0 * lambda * t).sqrt();
    let (a, b) = (r - eta, r + eta);
    let denom = (2.0 * erf(eta)).ln();
    let log_num = if a < LOG_ERFC_SERIES_FROM {
        (erfc(a) - erfc(b)).ln()
    } else {
        let la = log_erfc(a);
        la + (-(log_erfc(b) - la).exp()).ln_1p()
    };
    Ok((log_num - denom).min(0.0))
}

/// `E v̄(t)² / E v(t)²` for the sampler truncated at `|z| ≤ η√(4λt)`.
///
/// Evaluated as `[erfc(√(4λt) − η) − erfc(√(4λt) + η)] / (2 erf η)`, which
/// equals `[erfc(−η − √(4λt)) − erfc(η − √(4λt))] / (2 erf η)` but does not
/// cancel for large `t`.
pub fn gbm_truncation_ratio(lambda: f64, t: f64, eta: f64) -> Result<f64> {
    Ok(log_gbm_truncation_ratio(lambda, t, eta)?.exp())
}

/// Mean-value approximation `2η/(√π erf η) · e^{−4λt}` of the ratio.
///
/// It places the intermediate point at `√(4λt)`; the error factor is up to
/// `e^{±(2η√(4λt) + η²)}`, so it is only accurate while `η√(4λt) ≪ 1`.
pub fn truncation_ratio_mean_value(lambda: f64, t: f64, eta: f64) -> Result<f64> {
    check_ratio_args(lambda, t, eta)?;
    Ok(2.0 * eta / (std::f64::consts::PI.sqrt() * erf(eta)) * (-4.0 * lambda * t).exp())
}

/// Rigorous bracket from the mean value theorem: the intermediate point lies
/// in `(√(4λt) − η, √(4λt) + η)`. Returns `(lower, upper)`.
pub fn truncation_ratio_bounds(lambda: f64, t: f64, eta: f64) -> Result<(f64, f64)> {
    check_ratio_args(lambda, t, eta)?;
    let r = (4.0 * lambda * t).sqrt();
    let pre = 2.0 * eta / (std::f64::consts::PI.sqrt() * erf(eta));
    let near = if r > eta { (r - eta).powi(2) } else { 0.0 };
    Ok((pre * (-(r + eta).powi(2)).exp(), pre * (-near).exp()))
}

/// `η = max_t |z(t)| / √(4λt)` over `(t, z)` samples with `t > 0`.
pub fn eta_from_path(samples: &[(f64, f64)], lambda: f64) -> Result<f64> {
    if samples.is_empty() {
        return invalid("no samples to estimate the truncation level from");
    }
    if !(lambda > 0.0) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    samples.iter().try_fold(0.0f64, |eta, &(t, z)| {
        if !(t > 0.0) {
            return invalid(format!("samples must have t > 0, got t = {t}"));
        }
        Ok(eta.max(z.abs() / (4.0 * lambda * t).sqrt()))
    })
}

/// `(E v(t), E v(t)²) = (e^{λt}, e^{4λt})` when `σ² = 2λ`.
pub fn gbm_exact_moments(lambda: f64, t: f64) -> (f64, f64) {
    ((lambda * t).exp(), (4.0 * lambda * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmBiasConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub q_paths: usize,
    pub t_end: f64,
    /// Number of sampling intervals; rows are written at `t_k = k·T/samples`.
    pub samples: usize,
    pub base_seed: u64,
}

impl Default for GbmBiasConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            sigma: 1.0,
            q_paths: 100_000,
            t_end: 30.0,
            samples: 1000,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmBiasRow {
    pub t: f64,
    pub log_mc_second_moment: f64,
    pub log_exact_second_moment: f64,
    pub log_ratio_mc: f64,
    pub log_ratio_theory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmBiasStudy {
    pub rows: Vec<GbmBiasRow>,
    /// Truncation level realized by the pooled sample.
    pub eta: f64,
}

/// Samples `z` exactly on the output grid for every path, estimates
/// `E exp(2z(t))`, and compares the bias with the truncation formula at the
/// realized `η`.
pub fn gbm_bias_study(cfg: &GbmBiasConfig) -> Result<GbmBiasStudy> {
    let GbmBiasConfig {
        lambda,
        sigma,
        q_paths,
        t_end,
        samples,
        base_seed,
    } = *cfg;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if (sigma * sigma - 2.0 * lambda).abs() > 1e-12 * (2.0 * lambda).max(1.0) {
        return invalid(format!(
            "the bias study needs sigma^2 = 2 lambda, got sigma = {sigma}, lambda = {lambda}"
        ));
    }
    if q_paths == 0 || samples == 0 {
        return invalid("paths and samples must be positive");
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid(format!("horizon must be positive, got {t_end}"));
    }
    let h = t_end / samples as f64;
    let step_sd = (2.0 * lambda * h).sqrt();
    let times: Vec<f64> = (1..=samples).map(|k| k as f64 * h).collect();
    let scales: Vec<f64> = times
        .iter()
        .map(|t| 1.0 / (4.0 * lambda * t).sqrt())
        .collect();

    let run_path = |path: usize| -> (Vec<f64>, f64) {
        let mut noise = NoiseStream::new(SeedMaterial::new(base_seed, 0, path as u64, 0));
        let mut z = 0.0;
        let mut eta = 0.0f64;
        let squares = scales
            .iter()
            .map(|s| {
                z += step_sd * noise.next_normal();
                eta = eta.max(z.abs() * s);
                (2.0 * z).exp()
            })
            .collect();
        (squares, eta)
    };

    let mut sum = vec![0.0; samples];
    let mut eta = 0.0f64;
    for start in (0..q_paths).step_by(PATH_CHUNK) {
        let end = (start + PATH_CHUNK).min(q_paths);
        let chunk: Vec<(Vec<f64>, f64)> = (start..end).into_par_iter().map(run_path).collect();
        for (squares, e) in chunk {
            sum.iter_mut().zip(&squares).for_each(|(s, x)| *s += x);
            eta = eta.max(e);
        }
    }

    let mut rows = Vec::with_capacity(samples + 1);
    rows.push(GbmBiasRow {
        t: 0.0,
        log_mc_second_moment: 0.0,
        log_exact_second_moment: 0.0,
        log_ratio_mc: 0.0,
        log_ratio_theory: 0.0,
    });
    for (&t, s) in times.iter().zip(&sum) {
        let log_mc = (s / q_paths as f64).ln();
        let log_exact = 4.0 * lambda * t;
        rows.push(GbmBiasRow {
            t,
            log_mc_second_moment: log_mc,
            log_exact_second_moment: log_exact,
            log_ratio_mc: log_mc - log_exact,
            log_ratio_theory: log_gbm_truncation_ratio(lambda, t, eta)?,
        });
    }
    Ok(GbmBiasStudy { rows, eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference values computed with 40-digit arithmetic.
    const ERF_TABLE: [(f64, f64, f64); 16] = [
        (0.0, 0.0, 1.0),
        (1e-8, 1.128_379_167_095_512_6e-8, 0.999_999_988_716_208_3),
        (0.1, 0.112_462_916_018_284_9, 0.887_537_083_981_715),
        (0.5, 0.520_499_877_813_046_5, 0.479_500_122_186_953_5),
        (1.0, 0.842_700_792_949_714_9, 0.157_299_207_050_285_13),
        (1.5, 0.966_105_146_475_310_8, 0.033_894_853_524_689_274),
        (2.0, 0.995_322_265_018_952_7, 0.004_677_734_981_047_266),
        (2.5, 0.999_593_047_982_555, 0.000_406_952_017_444_958_9),
        (3.0, 0.999_977_909_503_001_4, 0.000_022_090_496_998_585_44),
        (3.5, 0.999_999_256_901_627_6, 7.430_983_723_414_128e-7),
        (4.0, 0.999_999_984_582_742_1, 1.541_725_790_028_002e-8),
        (5.0, 0.999_999_999_998_462_6, 1.537_459_794_428_035e-12),
        (6.0, 0.99999999999999997848, 2.151_973_671_249_891_3e-17),
        (-0.3, -0.328_626_759_459_127_4, 1.328_626_759_459_127_4),
        (-1.2, -0.910_313_978_229_635_3, 1.910_313_978_229_635_4),
        (-2.7, -0.999_865_667_260_059_4, 1.999_865_667_260_059_4),
    ];

    const ERFC_TAIL: [(f64, f64); 5] = [
        (8.0, 1.122_429_717_298_292_6e-29),
        (10.0, 2.088_487_583_762_545e-45),
        (15.0, 7.212_994_172_451_207e-100),
        (20.0, 5.395_865_611_607_901e-176),
        (26.0, 5.663_192_408_856_143e-296),
    ];

    #[test]
    fn error_function_reference_values() {
        for (x, e, c) in ERF_TABLE {
            assert!((erf(x) - e).abs() <= 1e-15, "erf({x})");
            assert!(
                (erfc(x) - c).abs() <= 1e-15 * c.max(1e-300) + 1e-300,
                "erfc({x})"
            );
        }
        for (x, c) in ERFC_TAIL {
            assert!((erfc(x) / c - 1.0).abs() < 1e-13, "erfc({x})");
            assert!(
                (log_erfc(x) - c.ln()).abs() < 1e-12 * c.ln().abs(),
                "log_erfc({x})"
            );
        }
    }

    #[test]
    fn log_erfc_is_continuous_at_switch() {
        let below = erfc(LOG_ERFC_SERIES_FROM - 1e-9).ln();
        let above = log_erfc(LOG_ERFC_SERIES_FROM + 1e-9);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn ratio_reference_values() {
        // (λ, t, η, ln ratio) from 50-digit arithmetic
        let table = [
            (0.5, 30.0, 3.0, -25.368_068_471_878_36),
            (0.5, 10.0, 2.5, -5.935_290_425_222_571),
            (0.5, 1.0, 1.0, -1.106_513_032_662_364_7),
            (1.0, 200.0, 4.0, -594.182_017_057_339_7),
            (1.0, 2000.0, 4.0, -7_306.171_673_984_641),
            (0.5, 30.0, 1e-3, -59.999_960_000_330_66),
        ];
        for (l, t, e, want) in table {
            let got = log_gbm_truncation_ratio(l, t, e).unwrap();
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "{l} {t} {e}: {got}"
            );
        }
        let r = gbm_truncation_ratio(0.5, 30.0, 3.0).unwrap();
        assert!((r / 9.611_426_432_317_052e-12 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ratio_edge_cases() {
        for eta in [0.1, 1.0, 3.0, 10.0] {
            assert!((gbm_truncation_ratio(0.5, 0.0, eta).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((gbm_truncation_ratio(0.5, 5.0, 40.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(gbm_truncation_ratio(0.5, 5.0, f64::INFINITY).unwrap(), 1.0);
        assert!(gbm_truncation_ratio(0.5, 5.0, 0.0).is_err());
    }

    #[test]
    fn mean_value_forms() {
        let (l, t) = (0.5, 30.0);
        for eta in [1e-3, 0.5, 3.0] {
            let exact = gbm_truncation_ratio(l, t, eta).unwrap();
            let (lo, hi) = truncation_ratio_bounds(l, t, eta).unwrap();
            assert!(lo <= exact && exact <= hi, "η={eta}: {lo} {exact} {hi}");
        }
        let exact = gbm_truncation_ratio(l, t, 1e-3).unwrap();
        let approx = truncation_ratio_mean_value(l, t, 1e-3).unwrap();
        assert!((approx / exact - 1.0).abs() < 0.05);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_from_path(&[(0.5, 0.0), (1.0, 0.0)], 0.5).unwrap(), 0.0);
        assert_eq!(eta_from_path(&[(1.0, 2.0)], 1.0).unwrap(), 1.0);
        assert!(eta_from_path(&[], 1.0).is_err());
        assert!(eta_from_path(&[(0.0, 1.0)], 1.0).is_err());
    }

    #[test]
    fn exact_moments() {
        assert_eq!(gbm_exact_moments(0.5, 0.0), (1.0, 1.0));
        let (m, s) = gbm_exact_moments(0.25, 4.0);
        assert!((m - std::f64::consts::E).abs() < 1e-15);
        assert!((s - 4f64.exp()).abs() < 1e-12);
        assert_eq!(gbm_exact_moments(0.5, 30.0).1, 60f64.exp());
    }

    #[test]
    fn brownian_eta_band() {
        // One path per run; T = 30, 1000 samples, λ = 0.5.
        let mut inside = 0;
        for seed in 0..100 {
            let cfg = GbmBiasConfig {
                q_paths: 1,
                base_seed: seed,
                ..GbmBiasConfig::default()
            };
            let eta = gbm_bias_study(&cfg).unwrap().eta;
            assert!(eta > 0.0 && eta.is_finite());
            if (0.5..=5.0).contains(&eta) {
                inside += 1;
            }
        }
        assert!(inside >= 95, "{inside}");

        // Pooling many paths pushes the maximum into the upper tail.
        for seed in 0..10 {
            let cfg = GbmBiasConfig {
                q_paths: 1000,
                base_seed: seed,
                ..GbmBiasConfig::default()
            };
            let eta = gbm_bias_study(&cfg).unwrap().eta;
            assert!((2.0..=5.0).contains(&eta), "{eta}");
        }
    }

    #[test]
    fn study_layout_and_reproducibility() {
        let cfg = GbmBiasConfig {
            q_paths: 300,
            samples: 50,
            t_end: 5.0,
            base_seed: 9,
            ..GbmBiasConfig::default()
        };
        let a = gbm_bias_study(&cfg).unwrap();
        assert_eq!(a.rows.len(), 51);
        assert_eq!(a.rows[0].log_mc_second_moment, 0.0);
        assert_eq!(a.rows[0].log_ratio_theory, 0.0);
        for row in &a.rows {
            assert_eq!(row.log_exact_second_moment, 4.0 * 0.5 * row.t);
        }
        assert_eq!(a, gbm_bias_study(&cfg).unwrap());
        let bad = GbmBiasConfig { sigma: 0.9, ..cfg };
        assert!(gbm_bias_study(&bad).is_err());
    }

    proptest! {
        #[test]
        fn ratio_in_unit_interval_and_decreasing(lambda in 0.05f64..2.0, eta in 0.01f64..6.0) {
            let mut prev = 1.0;
            for k in 0..60 {
                let t = k as f64 * 0.5;
                let r = gbm_truncation_ratio(lambda, t, eta).unwrap();
                prop_assert!(r > 0.0 && r <= 1.0);
                prop_assert!(r <= prev * (1.0 + 1e-12));
                prev = r;
            }
        }
    }
}
