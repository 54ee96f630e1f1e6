use super::SeriesMatrix;
use crate::error::{invalid, Error, Result};

/// Train/validation/test fractions of the time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let spec = Self { train, val, test };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(invalid(format!("split ratios must be non-negative, got {all:?}")));
        }
        if self.train <= 0.0 {
            return Err(invalid("train ratio must be positive"));
        }
        if ((self.train + self.val + self.test) - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("split ratios must sum to 1, got {all:?}")));
        }
        Ok(())
    }

    /// Target-region borders `(T1, T2)`: train `[0, T1)`, val `[T1, T2)`, test `[T2, T)`.
    pub fn borders(&self, len: usize) -> (usize, usize) {
        // the epsilon absorbs representation error such as 0.6 * 17420 = 10451.999...
        let floor = |x: f64| (x + 1e-9).floor() as usize;
        let t1 = floor(self.train * len as f64).min(len);
        let t2 = if self.test == 0.0 {
            len
        } else {
            floor((self.train + self.val) * len as f64).clamp(t1, len)
        };
        (t1, t2)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

/// Output of [`chronological_split`].
///
/// `val` and `test` carry `lookback` rows of left context, so their targets
/// start at local row `lookback`.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: SeriesMatrix,
    pub val: Option<SeriesMatrix>,
    pub test: Option<SeriesMatrix>,
    pub borders: (usize, usize),
    pub lookback: usize,
}

/// Splits `series` into contiguous, disjoint target regions.
pub fn chronological_split(series: &SeriesMatrix, spec: SplitSpec, lookback: usize) -> Result<Splits> {
    spec.validate()?;
    if lookback == 0 {
        return Err(invalid("lookback must be at least 1"));
    }
    let len = series.len();
    let (t1, t2) = spec.borders(len);
    let empty =
        |name: &str, ratio: f64| Error::TooShort(format!("{name} ratio {ratio} of {len} rows gives an empty split"));
    if t1 == 0 {
        return Err(empty("train", spec.train));
    }
    if spec.val > 0.0 && t2 == t1 {
        return Err(empty("val", spec.val));
    }
    if spec.test > 0.0 && t2 == len {
        return Err(empty("test", spec.test));
    }
    let with_context = |start: usize, end: usize, name: &str| -> Result<Option<SeriesMatrix>> {
        if start == end {
            return Ok(None);
        }
        if lookback > start {
            return Err(Error::TooShort(format!(
                "lookback {lookback} exceeds the {start} rows preceding the {name} split"
            )));
        }
        series.rows(start - lookback, end).map(Some)
    };
    let val = with_context(t1, t2, "val")?;
    let test = with_context(t2, len, "test")?;
    Ok(Splits {
        train: series.rows(0, t1)?,
        val,
        test,
        borders: (t1, t2),
        lookback,
    })
}
