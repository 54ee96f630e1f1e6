use ndarray::{s, Array2, Array3, Axis};

use super::SeriesMatrix;
use crate::error::{invalid, shape, Error, Result};

/// A batch of forecasting windows.
///
/// `inputs` is `B x L x N`, `targets` is `B x H x N`, and `anchor` (`B x N`)
/// is the last input row of every window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub inputs: Array3<f64>,
    pub anchor: Array2<f64>,
    pub targets: Array3<f64>,
}

impl WindowBatch {
    /// Builds a batch, deriving the anchor from the inputs.
    pub fn new(inputs: Array3<f64>, targets: Array3<f64>) -> Result<Self> {
        let (b, l, n) = inputs.dim();
        let (bt, h, nt) = targets.dim();
        if b == 0 || l == 0 || h == 0 || n == 0 {
            return Err(shape(format!(
                "empty batch dimension: inputs {:?}, targets {:?}",
                inputs.dim(),
                targets.dim()
            )));
        }
        if b != bt || n != nt {
            return Err(shape(format!(
                "inputs {:?} and targets {:?} disagree",
                inputs.dim(),
                targets.dim()
            )));
        }
        let anchor = inputs.index_axis(Axis(1), l - 1).to_owned();
        Ok(Self {
            inputs,
            anchor,
            targets,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.dim().0
    }

    pub fn lookback(&self) -> usize {
        self.inputs.dim().1
    }

    pub fn horizon(&self) -> usize {
        self.targets.dim().1
    }

    pub fn n_vars(&self) -> usize {
        self.inputs.dim().2
    }
}

/// What [`make_windows`] does when the series cannot hold one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShortSeries {
    #[default]
    Error,
    /// Return an empty window set and log a warning to stderr.
    Empty,
}

/// Sliding windows over a series, materialized on demand.
///
/// Window `i` has input rows `[start_i, start_i + L)` and target rows
/// `[start_i + L, start_i + L + H)` with `start_i = i * stride`.
#[derive(Debug, Clone)]
pub struct Windows<'a> {
    series: &'a SeriesMatrix,
    lookback: usize,
    horizon: usize,
    starts: Vec<usize>,
}

/// Enumerates every window of `lookback + horizon` rows at the given stride.
pub fn make_windows(
    series: &SeriesMatrix,
    lookback: usize,
    horizon: usize,
    stride: usize,
    short: ShortSeries,
) -> Result<Windows<'_>> {
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Err(invalid(format!(
            "lookback, horizon and stride must be positive (got {lookback}, {horizon}, {stride})"
        )));
    }
    let span = lookback + horizon;
    if series.len() < span {
        let msg = format!(
            "series of {} rows cannot hold a window of {lookback} + {horizon} rows",
            series.len()
        );
        return match short {
            ShortSeries::Error => Err(Error::TooShort(msg)),
            ShortSeries::Empty => {
                eprintln!("warning: {msg}; no windows produced");
                Ok(Windows {
                    series,
                    lookback,
                    horizon,
                    starts: Vec::new(),
                })
            }
        };
    }
    let starts = (0..=series.len() - span).step_by(stride).collect();
    Ok(Windows {
        series,
        lookback,
        horizon,
        starts,
    })
}

impl<'a> Windows<'a> {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_vars(&self) -> usize {
        self.series.n_vars()
    }

    /// First input row of each window.
    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn series(&self) -> &'a SeriesMatrix {
        self.series
    }

    /// Gathers the windows with the given indices into one batch.
    pub fn batch(&self, indices: &[usize]) -> WindowBatch {
        let (l, h, n) = (self.lookback, self.horizon, self.series.n_vars());
        let values = self.series.values();
        let mut inputs = Array3::zeros((indices.len(), l, n));
        let mut targets = Array3::zeros((indices.len(), h, n));
        for (b, &i) in indices.iter().enumerate() {
            let start = self.starts[i];
            inputs
                .index_axis_mut(Axis(0), b)
                .assign(&values.slice(s![start..start + l, ..]));
            targets
                .index_axis_mut(Axis(0), b)
                .assign(&values.slice(s![start + l..start + l + h, ..]));
        }
        WindowBatch::new(inputs, targets).expect("window dimensions are positive")
    }

    pub fn get(&self, i: usize) -> WindowBatch {
        self.batch(&[i])
    }

    /// Single-window batches in start order.
    pub fn iter(&self) -> impl Iterator<Item = WindowBatch> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Consecutive batches of at most `batch_size` windows, in start order.
    pub fn batches(&self, batch_size: usize) -> impl Iterator<Item = WindowBatch> + '_ {
        let idx: Vec<usize> = (0..self.len()).collect();
        let chunks: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
        chunks.into_iter().map(move |c| self.batch(&c))
    }
}
