//! Closed forms behind the objective, and estimators to check them.
//!
//! Under a first-order Markov model of the target, the Gaussian negative
//! log-likelihood (dropping constants and the overall variance scale) is
//!
//! ```text
//! NLL = e_1^2 + sum_{i=2..H} (e_i - phi_i e_{i-1})^2 / (1 - phi_i^2)
//! ```
//!
//! with `e_i` the prediction error at step `i` and `phi_i` the lag-1 partial
//! autocorrelation. It exceeds the plain sum of squared errors by
//! [`discrepancy_psi`]. If the error on each difference is `N(0, s^2)`, the
//! expected sign-inconsistency ratio is `mean_i Phi(-|d_i| / s)`
//! ([`expected_rho`]).

use rand_distr::{Distribution, Normal};

use crate::error::{invalid, shape, Result};
use crate::loss::sgn;
use crate::rng::{seeded, Stream};
use crate::series::SeriesMatrix;

/// Margin kept between a partial autocorrelation and +-1.
pub const PACF_MARGIN: f64 = 1e-6;

/// Lag-1 partial autocorrelations `phi_2 .. phi_H`, each within
/// `1 - PACF_MARGIN` of zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PacfVector(Vec<f64>);

impl PacfVector {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = phi.iter().enumerate().find(|(_, p)| !(p.abs() <= 1.0 - PACF_MARGIN)) {
            return Err(invalid(format!(
                "partial autocorrelation phi[{i}] = {p} must satisfy |phi| <= 1 - {PACF_MARGIN}"
            )));
        }
        Ok(Self(phi))
    }

    /// The same coefficient for every step of a horizon `H`.
    pub fn constant(phi: f64, horizon: usize) -> Result<Self> {
        Self::new(vec![phi; horizon.saturating_sub(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_lengths(eps: &[f64], phi: &PacfVector) -> Result<()> {
    if eps.is_empty() {
        return Err(shape("empty error vector"));
    }
    if phi.0.len() + 1 != eps.len() {
        return Err(shape(format!(
            "{} errors need {} coefficients, got {}",
            eps.len(),
            eps.len() - 1,
            phi.0.len()
        )));
    }
    Ok(())
}

/// `sum_{i=2..H} [phi_i^2 (e_i^2 + e_{i-1}^2) - 2 phi_i e_i e_{i-1}] / (1 - phi_i^2)`.
pub fn discrepancy_psi(eps: &[f64], phi: &PacfVector) -> Result<f64> {
    check_lengths(eps, phi)?;
    Ok(eps
        .windows(2)
        .zip(&phi.0)
        .map(|(e, &p)| {
            let (prev, cur) = (e[0], e[1]);
            (p * p * (cur * cur + prev * prev) - 2.0 * p * cur * prev) / (1.0 - p * p)
        })
        .sum())
}

/// Parameter-dependent part of the first-order Markov Gaussian NLL.
pub fn markov_nll_core(eps: &[f64], phi: &PacfVector) -> Result<f64> {
    check_lengths(eps, phi)?;
    let tail: f64 = eps
        .windows(2)
        .zip(&phi.0)
        .map(|(e, &p)| {
            let r = e[1] - p * e[0];
            r * r / (1.0 - p * p)
        })
        .sum();
    Ok(eps[0] * eps[0] + tail)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `mean_i Phi(-|d_i| / sigma_e)`.
pub fn expected_rho(diffs: &[f64], sigma_e: f64) -> Result<f64> {
    if !(sigma_e > 0.0) || !sigma_e.is_finite() {
        return Err(invalid(format!("sigma_e must be positive, got {sigma_e}")));
    }
    if diffs.is_empty() {
        return Err(shape("empty difference vector"));
    }
    Ok(diffs.iter().map(|d| std_normal_cdf(-d.abs() / sigma_e)).sum::<f64>() / diffs.len() as f64)
}

/// Mean over `n_trials` of the sign-inconsistency ratio between `d` and
/// `d - e`, with `e_i ~ N(0, sigma_e^2)` drawn independently per step and trial.
///
/// An exact zero in `d` always counts as inconsistent here (the perturbed
/// difference is almost surely nonzero), whereas the closed form assigns it
/// probability one half.
pub fn monte_carlo_rho(diffs: &[f64], sigma_e: f64, n_trials: usize, seed: u64) -> Result<f64> {
    if n_trials == 0 {
        return Err(invalid("n_trials must be at least 1"));
    }
    if diffs.is_empty() {
        return Err(shape("empty difference vector"));
    }
    if !(sigma_e >= 0.0) || !sigma_e.is_finite() {
        return Err(invalid(format!("sigma_e must be non-negative, got {sigma_e}")));
    }
    let noise = Normal::new(0.0, sigma_e).map_err(|e| invalid(e.to_string()))?;
    let mut rng = seeded(seed, Stream::MonteCarlo);
    let signs: Vec<f64> = diffs.iter().map(|&d| sgn(d)).collect();
    let mut mismatches = 0u64;
    for _ in 0..n_trials {
        for (&d, &s) in diffs.iter().zip(&signs) {
            let d_hat = d - noise.sample(&mut rng);
            if sgn(d_hat) != s {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches as f64 / (n_trials as f64 * diffs.len() as f64))
}

/// Lag-1 sample autocorrelation of each column, clamped to
/// `[-1 + PACF_MARGIN, 1 - PACF_MARGIN]`; constant columns give 0.
pub fn estimate_lag1_pacf(series: &SeriesMatrix) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(crate::Error::TooShort(format!(
            "lag-1 autocorrelation needs at least 3 rows, got {}",
            series.len()
        )));
    }
    let bound = 1.0 - PACF_MARGIN;
    Ok((0..series.n_vars())
        .map(|j| {
            let col = series.column(j);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            if var == 0.0 {
                return 0.0;
            }
            let cov: f64 = col
                .iter()
                .zip(col.iter().skip(1))
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum();
            (cov / var).clamp(-bound, bound)
        })
        .collect())
}
