use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

use crate::error::{invalid, Result};

pub(crate) fn check_kernel(kernel: usize, lookback: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(invalid(format!(
            "moving-average kernel must be odd and positive, got {kernel}"
        )));
    }
    if kernel > 2 * lookback - 1 {
        return Err(invalid(format!(
            "moving-average kernel {kernel} exceeds 2 * lookback - 1 = {}",
            2 * lookback - 1
        )));
    }
    Ok(())
}

/// Centered moving average of each column of a `L x C` matrix, with the edge
/// rows replicated `(kernel - 1) / 2` times at each end. Returns
/// `(trend, seasonal)` with `seasonal = x - trend`.
///
/// The average is accumulated as deviations from the center value, so a
/// constant column, or `kernel == 1`, yields `trend == x` bit for bit.
pub(crate) fn decompose_columns(x: ArrayView2<'_, f64>, kernel: usize) -> (Array2<f64>, Array2<f64>) {
    let (len, cols) = x.dim();
    let half = (kernel - 1) / 2;
    let inv = 1.0 / kernel as f64;
    let mut trend = Array2::zeros((len, cols));
    let mut seasonal = Array2::zeros((len, cols));
    let mut acc = vec![0.0; cols];
    for i in 0..len {
        let center = x.row(i);
        acc.iter_mut().for_each(|a| *a = 0.0);
        for offset in 0..kernel {
            let j = (i + offset).saturating_sub(half).min(len - 1);
            let src = x.row(j);
            for ((a, &v), &c) in acc.iter_mut().zip(src.iter()).zip(center.iter()) {
                *a += v - c;
            }
        }
        for c in 0..cols {
            let shift = acc[c] * inv;
            trend[[i, c]] = center[c] + shift;
            seasonal[[i, c]] = -shift;
        }
    }
    (trend, seasonal)
}

/// Splits each series of a `B x L x N` batch into a moving-average trend and
/// the seasonal remainder.
pub fn moving_average_decompose(inputs: ArrayView3<'_, f64>, kernel: usize) -> Result<(Array3<f64>, Array3<f64>)> {
    let (b, l, n) = inputs.dim();
    if l == 0 {
        return Err(invalid("empty lookback"));
    }
    check_kernel(kernel, l)?;
    let mut trend = Array3::zeros((b, l, n));
    let mut seasonal = Array3::zeros((b, l, n));
    for bi in 0..b {
        let (t, s) = decompose_columns(inputs.index_axis(ndarray::Axis(0), bi), kernel);
        trend.index_axis_mut(ndarray::Axis(0), bi).assign(&t);
        seasonal.index_axis_mut(ndarray::Axis(0), bi).assign(&s);
    }
    Ok((trend, seasonal))
}
