//! Gaussian-process regression over scoring trajectories: moving-average
//! smoothing, z-score normalization, an RBF-plus-noise kernel with marginal
//! likelihood hyperparameter optimization, and posterior support intervals.

mod linalg;
mod optimize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use linalg::uniform_spacing;

/// Smoothing window used by the consistency pipeline.
pub const DEFAULT_WINDOW: usize = 4;
/// z multiplier for the 95% support interval.
pub const DEFAULT_Z: f64 = 1.96;
/// Jitter added to the Gram diagonal, escalated once on factorization
/// failure.
pub const JITTERS: [f64; 2] = [1e-8, 1e-4];

/// Optimization box: (signal_variance, length_scale, noise_variance).
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (0.1, 100.0);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (1e-5, 1.0);

/// The same box in log space, ordered like [`KernelParams`] fields.
pub(crate) const LOG_BOUNDS: [(f64, f64); 3] = [
    (-6.907755278982137, 6.907755278982137), // ln 1e-3 .. ln 1e3
    (-2.302585092994046, 4.605170185988092), // ln 0.1 .. ln 100
    (-11.512925464970229, 0.0),              // ln 1e-5 .. ln 1
];

/// RBF kernel hyperparameters plus independent observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    /// Kernel value `signal_variance · exp(−(x−x′)²/(2·length_scale²))`
    /// plus `noise_variance` when `x == x′` exactly.
    pub fn kernel(&self, x: f64, x_prime: f64) -> f64 {
        let d = x - x_prime;
        let cov =
            self.signal_variance * (-d * d / (2.0 * self.length_scale * self.length_scale)).exp();
        if x == x_prime {
            cov + self.noise_variance
        } else {
            cov
        }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let ok = self.signal_variance > 0.0
            && self.length_scale > 0.0
            && self.noise_variance >= 0.0
            && self.signal_variance.is_finite()
            && self.length_scale.is_finite()
            && self.noise_variance.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GpError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// A smoothed, normalized series with the moments that were removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedSeries {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

/// Posterior predictive of the latent function on a query grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprPosterior {
    pub query_xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub params: KernelParams,
    pub log_marginal_likelihood: f64,
}

#[derive(Debug, Error)]
pub enum GpError {
    #[error("series is empty")]
    EmptyInput,
    #[error("moving-average window must be >= 1")]
    BadWindow,
    #[error("need at least 2 points, got {got}")]
    TooFewPoints { got: usize },
    #[error("xs and ys lengths differ: {xs} vs {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("inputs must be finite")]
    NonFinite,
    #[error("xs must be strictly increasing")]
    NotIncreasing,
    #[error("Gram factorization failed even with escalated jitter")]
    Factorization,
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
}

/// Trailing moving average with window `omega`; early positions truncate to
/// the available prefix, so output length equals input length.
pub fn moving_average(ys: &[f64], omega: usize) -> Result<Vec<f64>, GpError> {
    if omega < 1 {
        return Err(GpError::BadWindow);
    }
    if ys.is_empty() {
        return Err(GpError::EmptyInput);
    }
    let mut out = Vec::with_capacity(ys.len());
    let mut sum = 0.0;
    for t in 0..ys.len() {
        sum += ys[t];
        if t >= omega {
            sum -= ys[t - omega];
        }
        let width = (t + 1).min(omega);
        out.push(sum / width as f64);
    }
    Ok(out)
}

/// Z-score against the population standard deviation. A degenerate series
/// (σ < 1e−12) maps to all zeros.
pub fn normalize(ys: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = ys.len() as f64;
    if ys.is_empty() {
        return (Vec::new(), 0.0, 0.0);
    }
    let mu = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let zs = if sigma < 1e-12 {
        vec![0.0; ys.len()]
    } else {
        ys.iter().map(|y| (y - mu) / sigma).collect()
    };
    (zs, mu, sigma)
}

/// Smooth and normalize raw scores onto the 1-based question grid.
pub fn smooth_series(scores: &[f64], omega: usize) -> Result<SmoothedSeries, GpError> {
    let smoothed = moving_average(scores, omega)?;
    let (ys, mu, sigma) = normalize(&smoothed);
    let xs = (1..=scores.len()).map(|i| i as f64).collect();
    Ok(SmoothedSeries { xs, ys, mu, sigma })
}

fn check_inputs(xs: &[f64], ys: &[f64]) -> Result<(), GpError> {
    if xs.len() != ys.len() {
        return Err(GpError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(GpError::TooFewPoints { got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite);
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GpError::NotIncreasing);
    }
    Ok(())
}

/// Log marginal likelihood of the data under `params` (jittered Gram).
/// Uses the Toeplitz route on uniform grids and dense Cholesky otherwise.
pub fn log_marginal_likelihood(
    xs: &[f64],
    ys: &[f64],
    params: &KernelParams,
) -> Result<f64, GpError> {
    check_inputs(xs, ys)?;
    params.validate()?;
    if let Some(spacing) = linalg::uniform_spacing(xs) {
        if let Some(lml) = linalg::toeplitz_lml(xs.len(), spacing, ys, params, &JITTERS) {
            return Ok(lml);
        }
    }
    linalg::dense_lml(xs, ys, params, &JITTERS).ok_or(GpError::Factorization)
}

/// Posterior mean and variance of the latent function at `query_xs`, by
/// standard GP conditioning at fixed hyperparameters.
pub fn posterior(
    xs: &[f64],
    ys: &[f64],
    params: &KernelParams,
    query_xs: &[f64],
) -> Result<GprPosterior, GpError> {
    check_inputs(xs, ys)?;
    params.validate()?;
    if query_xs.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite);
    }
    let factor = linalg::dense_factor(xs, params, &JITTERS).ok_or(GpError::Factorization)?;
    let y = nalgebra::DVector::from_column_slice(ys);
    let alpha = factor.chol.solve(&y);
    let lml = -0.5 * y.dot(&alpha)
        - 0.5 * factor.chol.ln_determinant()
        - 0.5 * xs.len() as f64 * (2.0 * std::f64::consts::PI).ln();

    let k_star = linalg::cross_cov(query_xs, xs, params);
    let mean_v = &k_star * &alpha;
    let l = factor.chol.l();
    let v = l
        .solve_lower_triangular(&k_star.transpose())
        .ok_or(GpError::Factorization)?;
    let variance: Vec<f64> = (0..query_xs.len())
        .map(|j| {
            let reduction: f64 = v.column(j).iter().map(|x| x * x).sum();
            (params.signal_variance - reduction).max(0.0)
        })
        .collect();

    Ok(GprPosterior {
        query_xs: query_xs.to_vec(),
        mean: mean_v.iter().copied().collect(),
        variance,
        params: *params,
        log_marginal_likelihood: lml,
    })
}

/// Fit kernel hyperparameters by maximizing the log marginal likelihood
/// (multi-start ascent in log space, fixed seeds), then condition on the
/// query grid. Deterministic for fixed inputs.
pub fn fit_gpr(xs: &[f64], ys: &[f64], query_xs: &[f64]) -> Result<GprPosterior, GpError> {
    check_inputs(xs, ys)?;
    let objective = |theta: &[f64; 3]| {
        let p = optimize::params_from_log(theta);
        log_marginal_likelihood(xs, ys, &p).unwrap_or(f64::NEG_INFINITY)
    };
    let (params, _) = optimize::maximize(objective);
    posterior(xs, ys, &params, query_xs)
}

/// Pointwise support interval `μ(x) ± z·σ(x)`.
pub fn support_interval(post: &GprPosterior, z: f64) -> Vec<(f64, f64)> {
    post.mean
        .iter()
        .zip(&post.variance)
        .map(|(&m, &v)| {
            let half = z * v.sqrt();
            (m - half, m + half)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_examples() {
        assert_eq!(
            moving_average(&[1.0, 1.0, 1.0, 1.0, 1.0], 4).unwrap(),
            vec![1.0; 5]
        );
        assert_eq!(moving_average(&[0.0, 4.0], 4).unwrap(), vec![0.0, 2.0]);
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0, 5.0], 4).unwrap(),
            vec![1.0, 1.5, 2.0, 2.5, 3.5]
        );
        assert!(matches!(
            moving_average(&[1.0], 0),
            Err(GpError::BadWindow)
        ));
        assert!(matches!(moving_average(&[], 4), Err(GpError::EmptyInput)));
    }

    #[test]
    fn normalize_examples() {
        let (zs, mu, sigma) = normalize(&[2.0, 2.0, 2.0]);
        assert_eq!(zs, vec![0.0, 0.0, 0.0]);
        assert_eq!(mu, 2.0);
        assert_eq!(sigma, 0.0);

        let (zs, mu, sigma) = normalize(&[-1.0, 1.0]);
        assert_eq!(zs, vec![-1.0, 1.0]);
        assert_eq!(mu, 0.0);
        assert_eq!(sigma, 1.0);

        // Output moments: mean 0, population std 1.
        let (zs, _, _) = normalize(&[1.0, 2.0, 3.0, 4.0]);
        let n = zs.len() as f64;
        let mean = zs.iter().sum::<f64>() / n;
        let var = zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_normalization_affine_invariant() {
        let ys = [3.0, 1.0, 4.0, 1.0, 5.0, 2.0, 2.0, 4.0];
        let base = smooth_series(&ys, 4).unwrap();
        for (a, b) in [(0.5, -3.0), (2.0, 7.0), (10.0, 0.0)] {
            let mapped: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
            let got = smooth_series(&mapped, 4).unwrap();
            for (u, v) in base.ys.iter().zip(&got.ys) {
                assert!((u - v).abs() < 1e-9, "{u} vs {v} under a={a} b={b}");
            }
        }
    }

    #[test]
    fn kernel_diagonal_is_signal_plus_noise() {
        let p = KernelParams {
            signal_variance: 2.5,
            length_scale: 3.0,
            noise_variance: 0.25,
        };
        for x in [-4.0, 0.0, 17.5] {
            assert_eq!(p.kernel(x, x), 2.75);
        }
        assert!(p.kernel(0.0, 1.0) < 2.5);
    }

    #[test]
    fn noise_free_line_recovered_at_training_points() {
        let n = 24;
        let xs: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let raw: Vec<f64> = xs.clone();
        let (ys, _, _) = normalize(&raw);
        let post = fit_gpr(&xs, &ys, &xs).unwrap();
        for (m, y) in post.mean.iter().zip(&ys) {
            assert!((m - y).abs() < 1e-2, "mean {m} vs target {y}");
        }
        // Noise has nothing to explain; it should sit at the lower bound.
        assert!(
            post.params.noise_variance <= NOISE_VARIANCE_BOUNDS.0 * 1.01,
            "noise {}",
            post.params.noise_variance
        );
    }

    #[test]
    fn posterior_variance_shrinks_with_noise_at_training_points() {
        let xs: Vec<f64> = (1..=12).map(|i| i as f64).collect();
        let raw: Vec<f64> = xs.iter().map(|x| (x / 3.0).sin()).collect();
        let (ys, _, _) = normalize(&raw);
        let mut last = f64::INFINITY;
        for noise in [0.5, 0.1, 0.01, 1e-3, 1e-5] {
            let p = KernelParams {
                signal_variance: 1.0,
                length_scale: 2.0,
                noise_variance: noise,
            };
            let post = posterior(&xs, &ys, &p, &xs).unwrap();
            let mean_var = post.variance.iter().sum::<f64>() / post.variance.len() as f64;
            assert!(
                mean_var <= last + 1e-12,
                "variance should not grow as noise falls: {mean_var} vs {last}"
            );
            last = mean_var;
        }
    }

    #[test]
    fn support_interval_examples() {
        let post = GprPosterior {
            query_xs: vec![0.0, 1.0],
            mean: vec![0.0, 2.0],
            variance: vec![1.0, 0.0],
            params: KernelParams {
                signal_variance: 1.0,
                length_scale: 1.0,
                noise_variance: 0.0,
            },
            log_marginal_likelihood: 0.0,
        };
        let iv = support_interval(&post, DEFAULT_Z);
        assert!((iv[0].0 + 1.96).abs() < 1e-12 && (iv[0].1 - 1.96).abs() < 1e-12);
        // Zero variance collapses the interval onto the mean.
        assert_eq!(iv[1], (2.0, 2.0));
        let iv0 = support_interval(&post, 0.0);
        assert_eq!(iv0[0], (0.0, 0.0));
        // Upper bound never falls below the lower bound.
        for (lo, hi) in iv {
            assert!(hi >= lo);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let xs: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let raw: Vec<f64> = xs.iter().map(|x| (x * 0.7).sin() + 0.1 * x).collect();
        let (ys, _, _) = normalize(&raw);
        let a = fit_gpr(&xs, &ys, &xs).unwrap();
        let b = fit_gpr(&xs, &ys, &xs).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.variance, b.variance);
    }

    #[test]
    fn optimizer_beats_coarse_grid_smoke() {
        // Small version of the grid-oracle acceptance check: one dataset,
        // 8×8×8 grid.
        let xs: Vec<f64> = (1..=25).map(|i| i as f64).collect();
        let raw: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x * 0.5).sin() + if i % 3 == 0 { 0.3 } else { -0.1 })
            .collect();
        let (ys, _, _) = normalize(&raw);
        let post = fit_gpr(&xs, &ys, &xs).unwrap();

        let steps = 8;
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let frac = |idx: usize| idx as f64 / (steps - 1) as f64;
                    let p = KernelParams {
                        signal_variance: (LOG_BOUNDS[0].0
                            + frac(i) * (LOG_BOUNDS[0].1 - LOG_BOUNDS[0].0))
                            .exp(),
                        length_scale: (LOG_BOUNDS[1].0
                            + frac(j) * (LOG_BOUNDS[1].1 - LOG_BOUNDS[1].0))
                            .exp(),
                        noise_variance: (LOG_BOUNDS[2].0
                            + frac(k) * (LOG_BOUNDS[2].1 - LOG_BOUNDS[2].0))
                            .exp(),
                    };
                    let lml = log_marginal_likelihood(&xs, &ys, &p).unwrap();
                    grid_best = grid_best.max(lml);
                }
            }
        }
        assert!(
            post.log_marginal_likelihood >= grid_best - 1e-3,
            "optimized {} vs grid {}",
            post.log_marginal_likelihood,
            grid_best
        );
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            fit_gpr(&[1.0], &[0.0], &[1.0]),
            Err(GpError::TooFewPoints { got: 1 })
        ));
        assert!(matches!(
            fit_gpr(&[1.0, 1.0], &[0.0, 0.0], &[1.0]),
            Err(GpError::NotIncreasing)
        ));
        assert!(matches!(
            fit_gpr(&[1.0, 2.0], &[0.0, f64::NAN], &[1.0]),
            Err(GpError::NonFinite)
        ));
        assert!(matches!(
            fit_gpr(&[1.0, 2.0, 3.0], &[0.0, 1.0], &[1.0]),
            Err(GpError::LengthMismatch { .. })
        ));
    }
}
