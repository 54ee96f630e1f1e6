//! Fixtures shared by the benchmarks.

use ndarray::Array3;
use tdalign_core::rng::{seeded, Stream};
use tdalign_core::series::{gen_ar1, SeriesMatrix};

/// Deterministic `B x T x N` array with entries in `[-1, 1)`.
pub fn batch(dim: (usize, usize, usize), seed: u64) -> Array3<f64> {
    use rand::Rng;
    let mut rng = seeded(seed, Stream::Synth);
    Array3::from_shape_simple_fn(dim, || rng.random_range(-1.0..1.0))
}

/// AR(1) panel for training benchmarks.
pub fn ar1_panel(len: usize, n_vars: usize) -> SeriesMatrix {
    gen_ar1(0.9, 1.0, len, n_vars, 0).expect("valid generator arguments")
}
