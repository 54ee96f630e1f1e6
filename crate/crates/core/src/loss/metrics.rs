use ndarray::{ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};

use super::diff::{anchor_context, tdp, tdt, DiffSpec};
use super::objective::{point_loss, rho, tdt_loss, BaseLoss};
use crate::error::Result;

/// Forecast errors on the values and on their first-order differences.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub mse_d: f64,
    pub mae_d: f64,
    pub rho: f64,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 5] = ["mse", "mae", "mse_d", "mae_d", "rho"];

    pub fn values(&self) -> [f64; 5] {
        [self.mse, self.mae, self.mse_d, self.mae_d, self.rho]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        Self {
            mse: v[0],
            mae: v[1],
            mse_d: v[2],
            mae_d: v[3],
            rho: v[4],
        }
    }

    /// Equal-weight mean of several reports.
    pub fn mean<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Option<Self> {
        let mut acc = [0.0; 5];
        let mut count = 0usize;
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
            count += 1;
        }
        (count > 0).then(|| Self::from_values(acc.map(|a| a / count as f64)))
    }
}

/// MSE/MAE on the values, MSE_D/MAE_D/rho on the first-order differences
/// anchored at the true last input row.
pub fn evaluate_metrics(
    targets: ArrayView3<'_, f64>,
    predictions: ArrayView3<'_, f64>,
    anchor: ArrayView2<'_, f64>,
) -> Result<MetricsReport> {
    let ctx = anchor_context(anchor);
    let d = tdt(targets, ctx.view(), DiffSpec::FIRST_ORDER)?;
    let d_hat = tdp(predictions, ctx.view(), DiffSpec::FIRST_ORDER)?;
    Ok(MetricsReport {
        mse: point_loss(targets, predictions, BaseLoss::Mse)?,
        mae: point_loss(targets, predictions, BaseLoss::Mae)?,
        mse_d: tdt_loss(d.view(), d_hat.view(), BaseLoss::Mse)?,
        mae_d: tdt_loss(d.view(), d_hat.view(), BaseLoss::Mae)?,
        rho: rho(d.view(), d_hat.view())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    #[test]
    fn perfect_prediction() {
        let y = Array3::from_shape_fn((2, 4, 3), |(b, i, n)| (b + i * n) as f64 * 0.5);
        let anchor = array![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]];
        let m = evaluate_metrics(y.view(), y.view(), anchor.view()).unwrap();
        assert_eq!(m, MetricsReport::default());
    }

    #[test]
    fn hand_example() {
        // anchor 1, Y = [2, 4, 3] -> D = [1, 2, -1]; Yhat = [0.5, 0.5, 2] -> Dhat = [-0.5, 0, 1.5]
        let y = array![[[2.0], [4.0], [3.0]]];
        let p = array![[[0.5], [0.5], [2.0]]];
        let anchor = array![[1.0]];
        let m = evaluate_metrics(y.view(), p.view(), anchor.view()).unwrap();
        assert!((m.mse - (2.25 + 12.25 + 1.0) / 3.0).abs() < 1e-15);
        assert!((m.mae - (1.5 + 3.5 + 1.0) / 3.0).abs() < 1e-15);
        assert!((m.mse_d - (2.25 + 4.0 + 6.25) / 3.0).abs() < 1e-15);
        assert!((m.mae_d - (1.5 + 2.0 + 2.5) / 3.0).abs() < 1e-15);
        // all three steps disagree in sign: (+,-), (+,0), (-,+)
        assert_eq!(m.rho, 1.0);
    }

    #[test]
    fn mean_of_reports() {
        let a = MetricsReport::from_values([1.0, 2.0, 3.0, 4.0, 0.5]);
        let b = MetricsReport::from_values([3.0, 2.0, 1.0, 0.0, 0.0]);
        assert_eq!(
            MetricsReport::mean([&a, &b]).unwrap().values(),
            [2.0, 2.0, 2.0, 2.0, 0.25]
        );
        assert!(MetricsReport::mean(std::iter::empty()).is_none());
    }
}
