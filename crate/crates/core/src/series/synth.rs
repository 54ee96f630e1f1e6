use std::f64::consts::TAU;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::SeriesMatrix;
use crate::error::{invalid, Result};
use crate::rng::{seeded, Stream};

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| invalid(format!("normal(0, {sigma}): {e}")))
}

fn check_dims(len: usize, n_vars: usize) -> Result<()> {
    if len == 0 || n_vars == 0 {
        return Err(invalid(format!(
            "generator needs T >= 1 and N >= 1, got {len}x{n_vars}"
        )));
    }
    Ok(())
}

/// `series + eps` with `eps ~ N(0, variance)` i.i.d.; zero variance returns an exact copy.
pub fn inject_gaussian_noise(series: &SeriesMatrix, variance: f64, seed: u64) -> Result<SeriesMatrix> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(invalid(format!("noise variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(series.clone());
    }
    let dist = normal(variance.sqrt())?;
    let mut rng = seeded(seed, Stream::Noise);
    let mut out = series.values().to_owned();
    // row-major order keeps the draw sequence independent of memory layout
    for v in out.iter_mut() {
        *v += dist.sample(&mut rng);
    }
    Ok(series.with_values(out))
}

/// AR(1) columns: `x_0 = 0`, `x_t = phi * x_{t-1} + eta_t` with `eta_t ~ N(0, sigma^2)`.
pub fn gen_ar1(phi: f64, sigma: f64, len: usize, n_vars: usize, seed: u64) -> Result<SeriesMatrix> {
    if !(phi.abs() < 1.0) {
        return Err(invalid(format!("AR(1) needs |phi| < 1, got {phi}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("AR(1) needs sigma > 0, got {sigma}")));
    }
    check_dims(len, n_vars)?;
    let dist = normal(sigma)?;
    let mut rng = seeded(seed, Stream::Synth);
    let mut values = Array2::zeros((len, n_vars));
    for t in 1..len {
        for j in 0..n_vars {
            values[[t, j]] = phi * values[[t - 1, j]] + dist.sample(&mut rng);
        }
    }
    SeriesMatrix::from_values(values)
}

/// Sum of sinusoids plus Gaussian noise. Each column gets its own random
/// phase per component.
pub fn gen_sine_mix(
    periods: &[f64],
    amplitudes: &[f64],
    noise_sigma: f64,
    len: usize,
    n_vars: usize,
    seed: u64,
) -> Result<SeriesMatrix> {
    if periods.len() != amplitudes.len() || periods.is_empty() {
        return Err(invalid(format!(
            "need equally many periods and amplitudes (got {} and {})",
            periods.len(),
            amplitudes.len()
        )));
    }
    if periods.iter().any(|p| !(*p > 0.0)) {
        return Err(invalid("sine periods must be positive"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(invalid(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    check_dims(len, n_vars)?;
    let dist = normal(noise_sigma)?;
    let mut rng = seeded(seed, Stream::Synth);
    let phases: Vec<Vec<f64>> = (0..n_vars)
        .map(|_| periods.iter().map(|_| rng.random::<f64>() * TAU).collect())
        .collect();
    let mut values = Array2::zeros((len, n_vars));
    for t in 0..len {
        for j in 0..n_vars {
            let clean: f64 = periods
                .iter()
                .zip(amplitudes)
                .zip(&phases[j])
                .map(|((p, a), ph)| a * (TAU * t as f64 / p + ph).sin())
                .sum();
            values[[t, j]] = clean + dist.sample(&mut rng);
        }
    }
    SeriesMatrix::from_values(values)
}

/// Cumulative sums of `N(0, sigma^2)` steps starting from 0.
pub fn gen_random_walk(sigma: f64, len: usize, n_vars: usize, seed: u64) -> Result<SeriesMatrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("random walk needs sigma >= 0, got {sigma}")));
    }
    check_dims(len, n_vars)?;
    let dist = normal(sigma)?;
    let mut rng = seeded(seed, Stream::Synth);
    let mut values = Array2::zeros((len, n_vars));
    for t in 1..len {
        for j in 0..n_vars {
            values[[t, j]] = values[[t - 1, j]] + dist.sample(&mut rng);
        }
    }
    SeriesMatrix::from_values(values)
}
