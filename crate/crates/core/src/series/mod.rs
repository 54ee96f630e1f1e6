//! Observation panels, ingestion, splitting, scaling and windowing.

mod csv;
mod scaler;
mod split;
mod synth;
mod window;

pub use self::csv::load_csv;
pub use scaler::{ZScoreScaler, STD_FLOOR};
pub use split::{chronological_split, SplitSpec, Splits};
pub use synth::{gen_ar1, gen_random_walk, gen_sine_mix, inject_gaussian_noise};
pub use window::{make_windows, ShortSeries, WindowBatch, Windows};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{invalid, Result};

/// A `T x N` panel of observations: rows are time steps in increasing order,
/// columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    values: Array2<f64>,
    names: Vec<String>,
    granularity: Option<String>,
}

impl SeriesMatrix {
    /// Builds a panel, checking that it is non-empty, finite, and that there is
    /// one name per column.
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        let (t, n) = values.dim();
        if t == 0 || n == 0 {
            return Err(invalid(format!("series must be non-empty, got {t}x{n}")));
        }
        if names.len() != n {
            return Err(invalid(format!("{} names given for {} columns", names.len(), n)));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(crate::Error::NonFinite {
                array: "series".into(),
                index: pos,
            });
        }
        Ok(Self {
            values,
            names,
            granularity: None,
        })
    }

    /// Panel with generated column names `v0, v1, ...`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("v{j}")).collect();
        Self::new(values, names)
    }

    pub fn with_granularity(mut self, granularity: impl Into<String>) -> Self {
        self.granularity = Some(granularity.into());
        self
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn granularity(&self) -> Option<&str> {
        self.granularity.as_deref()
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    /// Always false for a constructed panel; present for clippy symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of variables `N`.
    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    /// Rows `[start, end)` as a new panel with the same names.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(invalid(format!(
                "row range [{start}, {end}) invalid for series of length {}",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values.slice(ndarray::s![start..end, ..]).to_owned(),
            names: self.names.clone(),
            granularity: self.granularity.clone(),
        })
    }

    /// Replaces the values, keeping names and granularity.
    pub(crate) fn with_values(&self, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), self.values.dim());
        Self {
            values,
            names: self.names.clone(),
            granularity: self.granularity.clone(),
        }
    }

    pub fn column(&self, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.index_axis(Axis(1), j)
    }
}
