use ndarray::{Array1, Axis, Zip};

use super::SeriesMatrix;
use crate::error::{shape, Error, Result};

/// Standard deviations below this are replaced by it before dividing.
pub const STD_FLOOR: f64 = 1e-8;

/// Column-wise z-score parameters, fitted on the training split.
///
/// Uses the population standard deviation (divide by `T`).
#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreScaler {
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl ZScoreScaler {
    pub fn fit(train: &SeriesMatrix) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::TooShort(format!(
                "scaler needs at least 2 rows, got {}",
                train.len()
            )));
        }
        let values = train.values();
        let mean = values.mean_axis(Axis(0)).expect("non-empty");
        let std = values
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s < STD_FLOOR { STD_FLOOR } else { s });
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<f64> {
        &self.std
    }

    pub fn transform(&self, series: &SeriesMatrix) -> Result<SeriesMatrix> {
        self.check(series)?;
        let mut out = series.values().to_owned();
        for mut row in out.rows_mut() {
            Zip::from(&mut row)
                .and(&self.mean)
                .and(&self.std)
                .for_each(|x, &m, &s| *x = (*x - m) / s);
        }
        Ok(series.with_values(out))
    }

    pub fn inverse_transform(&self, series: &SeriesMatrix) -> Result<SeriesMatrix> {
        self.check(series)?;
        let mut out = series.values().to_owned();
        for mut row in out.rows_mut() {
            Zip::from(&mut row)
                .and(&self.mean)
                .and(&self.std)
                .for_each(|x, &m, &s| *x = *x * s + m);
        }
        Ok(series.with_values(out))
    }

    fn check(&self, series: &SeriesMatrix) -> Result<()> {
        if series.n_vars() != self.mean.len() {
            return Err(shape(format!(
                "scaler fitted on {} columns, series has {}",
                self.mean.len(),
                series.n_vars()
            )));
        }
        Ok(())
    }
}
