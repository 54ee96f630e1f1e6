//! Channel-shared linear forecasters with closed-form gradients.
//!
//! Both models map the `L` input steps of every variable to `H` output steps
//! with weights shared across variables. `DLinear` first splits the input into
//! a moving-average trend and a seasonal remainder and applies one linear head
//! to each.

mod checkpoint;
mod decompose;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use decompose::moving_average_decompose;

use ndarray::{Array1, Array2, Array3, ArrayView3, Axis};
use rand::Rng;

use crate::error::{invalid, shape, Result};
use crate::rng::{seeded, Stream};

/// Moving-average kernel used by DLinear unless configured otherwise.
pub const DEFAULT_KERNEL: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    DLinear { kernel: usize },
}

impl ModelKind {
    pub fn heads(&self) -> usize {
        match self {
            ModelKind::Linear => 1,
            ModelKind::DLinear { .. } => 2,
        }
    }

    fn head_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::Linear => &["linear"],
            ModelKind::DLinear { .. } => &["trend", "seasonal"],
        }
    }
}

/// Weights (`H x L`) and biases (`H`) of each linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterParams {
    kind: ModelKind,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Gradients congruent with a [`ForecasterParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ForecasterParams {
    /// Builds parameters from explicit arrays; every weight must be `H x L`
    /// and every bias `H`.
    pub fn from_arrays(kind: ModelKind, weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.len() != kind.heads() || biases.len() != kind.heads() {
            return Err(shape(format!(
                "{kind:?} needs {} heads, got {} weights and {} biases",
                kind.heads(),
                weights.len(),
                biases.len()
            )));
        }
        let dim = weights[0].dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(shape("empty weight matrix"));
        }
        if weights.iter().any(|w| w.dim() != dim) || biases.iter().any(|b| b.len() != dim.0) {
            return Err(shape("heads disagree on horizon or lookback"));
        }
        if let ModelKind::DLinear { kernel } = kind {
            decompose::check_kernel(kernel, dim.1)?;
        }
        let params = Self { kind, weights, biases };
        params.check_finite()?;
        Ok(params)
    }

    /// Weights uniform in `[-1/L, 1/L]`, zero biases.
    pub fn init(kind: ModelKind, lookback: usize, horizon: usize, seed: u64) -> Result<Self> {
        if lookback == 0 || horizon == 0 {
            return Err(invalid(format!(
                "lookback {lookback} and horizon {horizon} must be positive"
            )));
        }
        if let ModelKind::DLinear { kernel } = kind {
            decompose::check_kernel(kernel, lookback)?;
        }
        let bound = 1.0 / lookback as f64;
        let mut rng = seeded(seed, Stream::Init);
        let weights = (0..kind.heads())
            .map(|_| Array2::from_shape_simple_fn((horizon, lookback), || rng.random_range(-bound..=bound)))
            .collect();
        let biases = (0..kind.heads()).map(|_| Array1::zeros(horizon)).collect();
        Ok(Self { kind, weights, biases })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn lookback(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn horizon(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Total number of learnable scalars.
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Array2::len).sum::<usize>() + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    /// `(name, values)` for every array in a fixed order.
    pub fn named_arrays(&self) -> Vec<(String, &[f64])> {
        named(self.kind, &self.weights, &self.biases)
    }

    pub fn named_arrays_mut(&mut self) -> Vec<(String, &mut [f64])> {
        named_mut(self.kind, &mut self.weights, &mut self.biases)
    }

    pub fn zero_grads(&self) -> GradSet {
        GradSet {
            weights: self.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (name, values) in self.named_arrays() {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(crate::Error::NonFinite { array: name, index });
            }
        }
        Ok(())
    }
}

impl GradSet {
    pub fn named_arrays(&self, kind: ModelKind) -> Vec<(String, &[f64])> {
        named(kind, &self.weights, &self.biases)
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn named<'a>(kind: ModelKind, weights: &'a [Array2<f64>], biases: &'a [Array1<f64>]) -> Vec<(String, &'a [f64])> {
    let mut out = Vec::with_capacity(2 * weights.len());
    for ((head, w), b) in kind.head_names().iter().zip(weights).zip(biases) {
        out.push((format!("{head}.weight"), w.as_slice().expect("standard layout")));
        out.push((format!("{head}.bias"), b.as_slice().expect("standard layout")));
    }
    out
}

fn named_mut<'a>(
    kind: ModelKind,
    weights: &'a mut [Array2<f64>],
    biases: &'a mut [Array1<f64>],
) -> Vec<(String, &'a mut [f64])> {
    let mut out = Vec::with_capacity(2 * weights.len());
    for ((head, w), b) in kind.head_names().iter().zip(weights.iter_mut()).zip(biases.iter_mut()) {
        out.push((format!("{head}.weight"), w.as_slice_mut().expect("standard layout")));
        out.push((format!("{head}.bias"), b.as_slice_mut().expect("standard layout")));
    }
    out
}

/// Inputs rearranged for the shared heads: one `L x (B*N)` matrix per head,
/// column `b * N + n` holding series `(b, n)`.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    components: Vec<Array2<f64>>,
    batch: usize,
    n_vars: usize,
}

impl PreparedInput {
    pub fn new(params: &ForecasterParams, inputs: ArrayView3<'_, f64>) -> Result<Self> {
        let (b, l, n) = inputs.dim();
        if l != params.lookback() {
            return Err(shape(format!(
                "model lookback {} but input has {l} steps",
                params.lookback()
            )));
        }
        if b == 0 || n == 0 {
            return Err(shape("empty batch"));
        }
        let columns = inputs
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((l, b * n))
            .expect("standard layout");
        let components = match params.kind {
            ModelKind::Linear => vec![columns],
            ModelKind::DLinear { kernel } => {
                let (trend, seasonal) = decompose::decompose_columns(columns.view(), kernel);
                vec![trend, seasonal]
            }
        };
        Ok(Self {
            components,
            batch: b,
            n_vars: n,
        })
    }
}

/// Output columns `H x (B*N)` back to `B x H x N`.
fn unflatten(out: Array2<f64>, batch: usize, n_vars: usize) -> Array3<f64> {
    let h = out.nrows();
    out.into_shape_with_order((h, batch, n_vars))
        .expect("column count is B*N")
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
}

fn flatten(upstream: ArrayView3<'_, f64>) -> Array2<f64> {
    let (b, h, n) = upstream.dim();
    upstream
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((h, b * n))
        .expect("standard layout")
}

/// Prediction `B x H x N` for prepared inputs.
pub fn forward_prepared(params: &ForecasterParams, input: &PreparedInput) -> Array3<f64> {
    let mut out = Array2::zeros((params.horizon(), input.batch * input.n_vars));
    for ((w, b), x) in params.weights.iter().zip(&params.biases).zip(&input.components) {
        ndarray::linalg::general_mat_mul(1.0, w, x, 1.0, &mut out);
        out += &b.view().insert_axis(Axis(1));
    }
    unflatten(out, input.batch, input.n_vars)
}

/// Parameter gradients for prepared inputs given `dL/dY_hat`.
pub fn backward_prepared(
    params: &ForecasterParams,
    input: &PreparedInput,
    upstream: ArrayView3<'_, f64>,
) -> Result<GradSet> {
    let (b, h, n) = upstream.dim();
    if (b, n) != (input.batch, input.n_vars) || h != params.horizon() {
        return Err(shape(format!(
            "upstream {:?} does not match a forward of batch {} with horizon {} and {} variables",
            upstream.dim(),
            input.batch,
            params.horizon(),
            input.n_vars
        )));
    }
    let g = flatten(upstream);
    let bias_grad = g.sum_axis(Axis(1));
    let weights = input
        .components
        .iter()
        .map(|x| g.dot(&x.t()).as_standard_layout().into_owned())
        .collect();
    let biases = vec![bias_grad; params.kind.heads()];
    Ok(GradSet { weights, biases })
}

/// `B x L x N` inputs to `B x H x N` predictions.
pub fn forward(params: &ForecasterParams, inputs: ArrayView3<'_, f64>) -> Result<Array3<f64>> {
    Ok(forward_prepared(params, &PreparedInput::new(params, inputs)?))
}

/// Gradients of a scalar loss with respect to every parameter, given the
/// loss gradient with respect to the prediction on `inputs`.
pub fn backward(
    params: &ForecasterParams,
    inputs: ArrayView3<'_, f64>,
    upstream: ArrayView3<'_, f64>,
) -> Result<GradSet> {
    if let Some(index) = upstream.iter().position(|v| !v.is_finite()) {
        return Err(crate::Error::NonFinite {
            array: "upstream gradient".into(),
            index,
        });
    }
    backward_prepared(params, &PreparedInput::new(params, inputs)?, upstream)
}

pub fn param_count(params: &ForecasterParams) -> usize {
    params.param_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_inputs(seed: u64, dim: (usize, usize, usize)) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_simple_fn(dim, || rng.random_range(-1.0..1.0))
    }

    /// Triple-loop reference for the shared linear head.
    fn naive_forward(params: &ForecasterParams, x: &Array3<f64>) -> Array3<f64> {
        let (b, l, n) = x.dim();
        let h = params.horizon();
        let comps: Vec<Array3<f64>> = match params.kind() {
            ModelKind::Linear => vec![x.clone()],
            ModelKind::DLinear { kernel } => {
                let (t, s) = moving_average_decompose(x.view(), kernel).unwrap();
                vec![t, s]
            }
        };
        let mut out = Array3::zeros((b, h, n));
        for (head, c) in comps.iter().enumerate() {
            for bi in 0..b {
                for ni in 0..n {
                    for i in 0..h {
                        let mut acc = params.biases()[head][i];
                        for j in 0..l {
                            acc += params.weights()[head][[i, j]] * c[[bi, j, ni]];
                        }
                        out[[bi, i, ni]] += acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for kind in [ModelKind::Linear, ModelKind::DLinear { kernel: 5 }] {
            let mut p = ForecasterParams::init(kind, 12, 7, 3).unwrap();
            for (_, b) in p.named_arrays_mut().into_iter().filter(|(n, _)| n.ends_with("bias")) {
                b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64);
            }
            let x = random_inputs(9, (3, 12, 4));
            let fast = forward(&p, x.view()).unwrap();
            let slow = naive_forward(&p, &x);
            let err = (&fast - &slow).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-12, "{kind:?}: {err}");
        }
    }

    #[test]
    fn averaging_rows_preserve_constants() {
        let (l, h) = (6, 3);
        let w = Array2::from_elem((h, l), 1.0 / l as f64);
        let p = ForecasterParams::from_arrays(ModelKind::Linear, vec![w], vec![Array1::zeros(h)]).unwrap();
        let x = Array3::from_elem((2, l, 3), 4.5);
        let y = forward(&p, x.view()).unwrap();
        assert!(y.iter().all(|&v| (v - 4.5).abs() < 1e-14));
    }

    #[test]
    fn zero_weights_emit_bias() {
        let bias = array![1.0, -2.0, 3.0];
        let p =
            ForecasterParams::from_arrays(ModelKind::Linear, vec![Array2::zeros((3, 4))], vec![bias.clone()]).unwrap();
        let y = forward(&p, random_inputs(1, (2, 4, 3)).view()).unwrap();
        for bi in 0..2 {
            for n in 0..3 {
                for i in 0..3 {
                    assert_eq!(y[[bi, i, n]], bias[i]);
                }
            }
        }
    }

    #[test]
    fn forward_is_linear_without_bias() {
        let p = ForecasterParams::init(ModelKind::DLinear { kernel: 3 }, 8, 5, 2).unwrap();
        let x1 = random_inputs(1, (2, 8, 2));
        let x2 = random_inputs(2, (2, 8, 2));
        let (a, b) = (0.7, -1.3);
        let lhs = forward(&p, (&x1 * a + &x2 * b).view()).unwrap();
        let rhs = forward(&p, x1.view()).unwrap() * a + forward(&p, x2.view()).unwrap() * b;
        assert!((&lhs - &rhs).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn scalar_chain_rule() {
        let p = ForecasterParams::from_arrays(ModelKind::Linear, vec![array![[0.3]]], vec![array![0.1]]).unwrap();
        let x = array![[[2.0]]];
        let up = array![[[0.5]]];
        let g = backward(&p, x.view(), up.view()).unwrap();
        assert_eq!(g.weights[0][[0, 0]], 0.5 * 2.0);
        assert_eq!(g.biases[0][0], 0.5);
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let p = ForecasterParams::init(ModelKind::DLinear { kernel: 3 }, 6, 4, 0).unwrap();
        let x = random_inputs(5, (2, 6, 3));
        let g = backward(&p, x.view(), Array3::zeros((2, 4, 3)).view()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn param_counts() {
        let lin = ForecasterParams::init(ModelKind::Linear, 336, 96, 0).unwrap();
        let dl = ForecasterParams::init(ModelKind::DLinear { kernel: DEFAULT_KERNEL }, 336, 96, 0).unwrap();
        assert_eq!(param_count(&lin), 96 * 336 + 96);
        assert_eq!(param_count(&lin), 32352);
        assert_eq!(param_count(&dl), 64704);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let kind = ModelKind::DLinear { kernel: 5 };
        let a = ForecasterParams::init(kind, 20, 10, 7).unwrap();
        assert_eq!(a, ForecasterParams::init(kind, 20, 10, 7).unwrap());
        assert_ne!(a, ForecasterParams::init(kind, 20, 10, 8).unwrap());
        assert!(a.weights().iter().flat_map(|w| w.iter()).all(|v| v.abs() <= 1.0 / 20.0));
        assert!(a.biases().iter().flat_map(|b| b.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let p = ForecasterParams::init(ModelKind::Linear, 4, 2, 0).unwrap();
        assert!(forward(&p, Array3::zeros((1, 5, 1)).view()).is_err());
        assert!(backward(&p, Array3::zeros((1, 4, 1)).view(), Array3::zeros((1, 3, 1)).view()).is_err());
        assert!(ForecasterParams::init(ModelKind::DLinear { kernel: 4 }, 4, 2, 0).is_err());
        assert!(ForecasterParams::from_arrays(
            ModelKind::DLinear { kernel: 3 },
            vec![Array2::zeros((2, 4))],
            vec![Array1::zeros(2)]
        )
        .is_err());
    }
}
