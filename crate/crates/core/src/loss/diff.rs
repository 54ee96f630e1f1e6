use ndarray::{concatenate, s, Array3, ArrayView2, ArrayView3, Axis};

use crate::error::{invalid, shape, Result};

/// How temporal dependencies are formed: an `interval`-step difference
/// applied `order` times. `(1, 1)` gives adjacent-step changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiffSpec {
    order: usize,
    interval: usize,
}

impl DiffSpec {
    pub const FIRST_ORDER: DiffSpec = DiffSpec { order: 1, interval: 1 };

    pub fn new(order: usize, interval: usize) -> Result<Self> {
        if order == 0 || interval == 0 {
            return Err(invalid(format!(
                "difference order and interval must be >= 1, got order {order}, interval {interval}"
            )));
        }
        Ok(Self { order, interval })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    /// Rows of true history consumed before the first target step.
    pub fn context_len(&self) -> usize {
        self.order * self.interval
    }

    /// Checks the spec against a forecast horizon (`order * interval < horizon`).
    pub fn validate_for(&self, horizon: usize) -> Result<()> {
        if self.context_len() >= horizon {
            return Err(invalid(format!(
                "difference order {} x interval {} must be below the horizon {horizon}",
                self.order, self.interval
            )));
        }
        Ok(())
    }
}

impl Default for DiffSpec {
    fn default() -> Self {
        Self::FIRST_ORDER
    }
}

/// Lifts a `B x N` anchor into a one-row context, enough for first-order differences.
pub fn anchor_context(anchor: ArrayView2<'_, f64>) -> Array3<f64> {
    anchor.insert_axis(Axis(1)).to_owned()
}

fn extended(series: ArrayView3<'_, f64>, context: ArrayView3<'_, f64>, spec: DiffSpec) -> Result<Array3<f64>> {
    let (b, h, n) = series.dim();
    let (bc, c, nc) = context.dim();
    if b != bc || n != nc {
        return Err(shape(format!(
            "series {:?} and context {:?} disagree on batch or variables",
            series.dim(),
            context.dim()
        )));
    }
    if h == 0 {
        return Err(shape("empty horizon"));
    }
    let need = spec.context_len();
    if c < need {
        return Err(invalid(format!(
            "order {} x interval {} needs {need} context rows, only {c} available",
            spec.order, spec.interval
        )));
    }
    let tail = context.slice(s![.., c - need.., ..]);
    Ok(concatenate(Axis(1), &[tail, series]).expect("shapes checked"))
}

fn difference(mut ext: Array3<f64>, spec: DiffSpec) -> Array3<f64> {
    let k = spec.interval;
    for _ in 0..spec.order {
        let len = ext.dim().1;
        ext = &ext.slice(s![.., k.., ..]) - &ext.slice(s![.., ..len - k, ..]);
    }
    ext
}

/// Differences of the true target, with steps before the horizon taken from
/// the last rows of `context` (the true input window, `B x C x N`).
///
/// For the first-order spec, `D[0] = Y[0] - anchor` and `D[i] = Y[i] - Y[i-1]`.
pub fn tdt(targets: ArrayView3<'_, f64>, context: ArrayView3<'_, f64>, spec: DiffSpec) -> Result<Array3<f64>> {
    Ok(difference(extended(targets, context, spec)?, spec))
}

/// Differences of the prediction. The steps that reach before the horizon use
/// the TRUE context, never predicted values.
pub fn tdp(predictions: ArrayView3<'_, f64>, context: ArrayView3<'_, f64>, spec: DiffSpec) -> Result<Array3<f64>> {
    tdt(predictions, context, spec)
}

/// Pulls a gradient with respect to the differences back onto the horizon
/// values (the transpose of the differencing map restricted to the prediction).
pub fn tdp_adjoint(grad_diff: ArrayView3<'_, f64>, spec: DiffSpec) -> Array3<f64> {
    let (b, h, n) = grad_diff.dim();
    let k = spec.interval;
    let mut g = grad_diff.to_owned();
    for _ in 0..spec.order {
        let len = g.dim().1;
        let mut up = Array3::zeros((b, len + k, n));
        up.slice_mut(s![.., k.., ..]).zip_mut_with(&g, |u, &v| *u += v);
        up.slice_mut(s![.., ..len, ..]).zip_mut_with(&g, |u, &v| *u -= v);
        g = up;
    }
    let total = g.dim().1;
    g.slice(s![.., total - h.., ..]).to_owned()
}
