use std::ops::Range;

use ndarray::{Array3, ArrayView3, Zip};

use super::diff::{tdp, tdp_adjoint, tdt, DiffSpec};
use crate::error::{invalid, shape, Result};

/// Per-step error `l(y, y_hat)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BaseLoss {
    #[default]
    Mse,
    Mae,
}

impl BaseLoss {
    fn value(self, err: f64) -> f64 {
        match self {
            BaseLoss::Mse => err * err,
            BaseLoss::Mae => err.abs(),
        }
    }

    /// Derivative with respect to the error; the MAE subgradient at 0 is 0.
    fn slope(self, err: f64) -> f64 {
        match self {
            BaseLoss::Mse => 2.0 * err,
            BaseLoss::Mae => sgn(err),
        }
    }
}

/// How the point loss and the difference loss are combined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LossMode {
    /// `L = L_Y`
    BaselineOnly,
    /// `L = L_Y + L_D`
    PlusLD,
    /// `L = rho * L_Y`
    RhoOnly,
    /// `L = alpha * L_Y + (1 - alpha) * L_D` with a fixed `alpha`
    FixedAlpha(f64),
    /// Like `FixedAlpha`, but `alpha` is trained. The trainer resolves it to
    /// `FixedAlpha(sigmoid(logit))` before each batch.
    LearnableAlpha,
    /// `L = rho * L_Y + (1 - rho) * L_D`, with `rho` the batch sign-inconsistency ratio
    #[default]
    TDAlign,
}

impl LossMode {
    /// Short name used in reports and configs.
    pub fn name(&self) -> &'static str {
        match self {
            LossMode::BaselineOnly => "baseline",
            LossMode::PlusLD => "plus_ld",
            LossMode::RhoOnly => "rho_only",
            LossMode::FixedAlpha(_) => "fixed_alpha",
            LossMode::LearnableAlpha => "learnable_alpha",
            LossMode::TDAlign => "tdalign",
        }
    }

    /// Whether the difference loss contributes to the objective.
    pub fn uses_diff_loss(&self) -> bool {
        !matches!(self, LossMode::BaselineOnly | LossMode::RhoOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossConfig {
    pub base: BaseLoss,
    pub mode: LossMode,
    pub diff: DiffSpec,
}

impl LossConfig {
    pub fn new(base: BaseLoss, mode: LossMode) -> Self {
        Self {
            base,
            mode,
            diff: DiffSpec::FIRST_ORDER,
        }
    }

    pub fn with_diff(mut self, diff: DiffSpec) -> Self {
        self.diff = diff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let LossMode::FixedAlpha(a) = self.mode {
            if !(0.0..=1.0).contains(&a) {
                return Err(invalid(format!("alpha must lie in [0, 1], got {a}")));
            }
        }
        Ok(())
    }
}

/// Components of one evaluation of the combined objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss_y: f64,
    pub loss_d: f64,
    pub rho: f64,
    /// Weight on `loss_y` (1, rho or alpha depending on the mode).
    pub weight: f64,
    pub total: f64,
    pub grad_wrt_prediction: Array3<f64>,
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Branch-free sign as -1, 0 or 1; random signs defeat the branch predictor.
#[inline]
fn sign_code(x: f64) -> i8 {
    i8::from(x > 0.0) - i8::from(x < 0.0)
}

fn same_shape(a: ArrayView3<'_, f64>, b: ArrayView3<'_, f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(shape("empty tensors"));
    }
    Ok(())
}

fn mean_error(truth: ArrayView3<'_, f64>, pred: ArrayView3<'_, f64>, base: BaseLoss) -> Result<f64> {
    same_shape(truth, pred)?;
    let mut acc = 0.0;
    Zip::from(&truth).and(&pred).for_each(|&y, &p| acc += base.value(y - p));
    Ok(acc / truth.len() as f64)
}

/// Mean of `l(y, y_hat)` over batch, horizon and variables.
pub fn point_loss(targets: ArrayView3<'_, f64>, predictions: ArrayView3<'_, f64>, base: BaseLoss) -> Result<f64> {
    mean_error(targets, predictions, base)
}

/// Mean of `l(d, d_hat)` over batch, horizon and variables.
pub fn tdt_loss(diffs: ArrayView3<'_, f64>, pred_diffs: ArrayView3<'_, f64>, base: BaseLoss) -> Result<f64> {
    mean_error(diffs, pred_diffs, base)
}

/// Fraction of entries whose signs disagree, averaged over every
/// `(batch, step, variable)` entry.
pub fn rho(diffs: ArrayView3<'_, f64>, pred_diffs: ArrayView3<'_, f64>) -> Result<f64> {
    same_shape(diffs, pred_diffs)?;
    let mut mismatches = 0usize;
    Zip::from(&diffs).and(&pred_diffs).for_each(|&d, &p| {
        if sgn(d) != sgn(p) {
            mismatches += 1;
        }
    });
    Ok(mismatches as f64 / diffs.len() as f64)
}

fn gradient_of_mean(truth: ArrayView3<'_, f64>, pred: ArrayView3<'_, f64>, base: BaseLoss) -> Array3<f64> {
    let scale = 1.0 / truth.len() as f64;
    Zip::from(&pred)
        .and(&truth)
        .map_collect(|&p, &y| scale * base.slope(p - y))
}

/// Evaluates the combined objective and its gradient with respect to the
/// prediction. `context` is the true input window (`B x C x N`, `C` at least
/// `order * interval`). `rho` is a constant of the batch: no gradient flows
/// through it.
pub fn combined_loss(
    targets: ArrayView3<'_, f64>,
    predictions: ArrayView3<'_, f64>,
    context: ArrayView3<'_, f64>,
    config: &LossConfig,
) -> Result<LossReport> {
    config.validate()?;
    same_shape(targets, predictions)?;
    if config.diff == DiffSpec::FIRST_ORDER {
        if let (Some(y), Some(p)) = (targets.as_slice(), predictions.as_slice()) {
            return first_order_fused(y, p, targets.dim(), context, config);
        }
    }
    let d = tdt(targets, context, config.diff)?;
    let d_hat = tdp(predictions, context, config.diff)?;
    let loss_y = point_loss(targets, predictions, config.base)?;
    let loss_d = tdt_loss(d.view(), d_hat.view(), config.base)?;
    let rho = rho(d.view(), d_hat.view())?;

    let (wy, wd) = mode_weights(config.mode, rho)?;
    let total = wy * loss_y + wd * loss_d;

    let mut grad = gradient_of_mean(targets, predictions, config.base);
    grad.mapv_inplace(|g| wy * g);
    if wd != 0.0 {
        let grad_d = gradient_of_mean(d.view(), d_hat.view(), config.base);
        let pulled = tdp_adjoint(grad_d.view(), config.diff);
        grad.scaled_add(wd, &pulled);
    }
    Ok(LossReport {
        loss_y,
        loss_d,
        rho,
        weight: wy,
        total,
        grad_wrt_prediction: grad,
    })
}

/// (weight on L_Y, weight on L_D)
fn mode_weights(mode: LossMode, rho: f64) -> Result<(f64, f64)> {
    Ok(match mode {
        LossMode::BaselineOnly => (1.0, 0.0),
        LossMode::PlusLD => (1.0, 1.0),
        LossMode::RhoOnly => (rho, 0.0),
        LossMode::FixedAlpha(a) => (a, 1.0 - a),
        LossMode::TDAlign => (rho, 1.0 - rho),
        LossMode::LearnableAlpha => {
            return Err(invalid(
                "learnable alpha must be resolved to a fixed weight by the trainer before evaluation",
            ))
        }
    })
}

/// First-order objective on contiguous `B x H x N` buffers in two passes:
/// one for the losses and the sign count, one that writes the gradient.
/// Summation and rounding follow the general path, so results agree bit for bit.
fn first_order_fused(
    y: &[f64],
    p: &[f64],
    dim: (usize, usize, usize),
    context: ArrayView3<'_, f64>,
    config: &LossConfig,
) -> Result<LossReport> {
    let (b, _, n) = dim;
    let (bc, c, nc) = context.dim();
    if bc != b || nc != n {
        return Err(shape(format!(
            "series {dim:?} and context {:?} disagree on batch or variables",
            context.dim()
        )));
    }
    if c == 0 {
        return Err(invalid("order 1 x interval 1 needs 1 context rows, only 0 available"));
    }
    let anchors: Vec<f64> = context.slice(ndarray::s![.., c - 1, ..]).iter().copied().collect();
    match config.base {
        BaseLoss::Mse => fused_kernel(y, p, &anchors, dim, config.mode, |e| e * e, |e| 2.0 * e),
        BaseLoss::Mae => fused_kernel(y, p, &anchors, dim, config.mode, f64::abs, sgn),
    }
}

#[allow(clippy::too_many_arguments)]
fn fused_kernel(
    y: &[f64],
    p: &[f64],
    anchors: &[f64],
    (b, h, n): (usize, usize, usize),
    mode: LossMode,
    value: impl Fn(f64) -> f64,
    slope: impl Fn(f64) -> f64,
) -> Result<LossReport> {
    let block = h * n;
    // row `i` of series `bi` and the row before it (the anchor for step 0)
    let rows = |bi: usize, i: usize| -> (Range<usize>, Range<usize>, bool) {
        let at = bi * block + i * n;
        if i == 0 {
            (at..at + n, bi * n..bi * n + n, true)
        } else {
            (at..at + n, at - n..at, false)
        }
    };

    let (mut sum_y, mut sum_d, mut mismatches) = (0.0, 0.0, 0usize);
    for bi in 0..b {
        for i in 0..h {
            let (cur, before, first) = rows(bi, i);
            let (yp, pp) = if first {
                (&anchors[before.clone()], &anchors[before])
            } else {
                (&y[before.clone()], &p[before])
            };
            for (((&yv, &pv), &yq), &pq) in y[cur.clone()].iter().zip(&p[cur]).zip(yp).zip(pp) {
                let d = yv - yq;
                let d_hat = pv - pq;
                sum_y += value(yv - pv);
                sum_d += value(d - d_hat);
                mismatches += usize::from(sign_code(d) != sign_code(d_hat));
            }
        }
    }
    let m = y.len() as f64;
    let (loss_y, loss_d, rho) = (sum_y / m, sum_d / m, mismatches as f64 / m);
    let (wy, wd) = mode_weights(mode, rho)?;
    let total = wy * loss_y + wd * loss_d;

    let scale = 1.0 / m;
    let mut grad = Vec::with_capacity(y.len());
    for bi in 0..b {
        for i in 0..h {
            let (cur, before, first) = rows(bi, i);
            if wd == 0.0 {
                grad.extend(
                    y[cur.clone()]
                        .iter()
                        .zip(&p[cur])
                        .map(|(&yv, &pv)| wy * (scale * slope(pv - yv))),
                );
                continue;
            }
            let (yp, pp) = if first {
                (&anchors[before.clone()], &anchors[before])
            } else {
                (&y[before.clone()], &p[before])
            };
            for j in 0..n {
                let at = cur.start + j;
                let (yv, pv) = (y[at], p[at]);
                let here = scale * slope((pv - pp[j]) - (yv - yp[j]));
                let next = if i + 1 < h {
                    scale * slope((p[at + n] - pv) - (y[at + n] - yv))
                } else {
                    0.0
                };
                grad.push(wy * (scale * slope(pv - yv)) + wd * ((0.0 + here) - next));
            }
        }
    }
    let grad_wrt_prediction = Array3::from_shape_vec((b, h, n), grad).expect("length matches shape");
    Ok(LossReport {
        loss_y,
        loss_d,
        rho,
        weight: wy,
        total,
        grad_wrt_prediction,
    })
}

/// Point loss and its gradient only, skipping differences and `rho`.
pub fn point_loss_with_grad(
    targets: ArrayView3<'_, f64>,
    predictions: ArrayView3<'_, f64>,
    base: BaseLoss,
) -> Result<(f64, Array3<f64>)> {
    let loss = point_loss(targets, predictions, base)?;
    Ok((loss, gradient_of_mean(targets, predictions, base)))
}

/// Gradient of the combined objective with respect to the prediction.
pub fn loss_grad_wrt_prediction(
    targets: ArrayView3<'_, f64>,
    predictions: ArrayView3<'_, f64>,
    context: ArrayView3<'_, f64>,
    config: &LossConfig,
) -> Result<Array3<f64>> {
    Ok(combined_loss(targets, predictions, context, config)?.grad_wrt_prediction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::diff::anchor_context;
    use ndarray::{Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(v: &[f64]) -> Array3<f64> {
        Array1::from(v.to_vec()).into_shape_with_order((1, v.len(), 1)).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, dim: (usize, usize, usize)) -> Array3<f64> {
        Array3::from_shape_fn(dim, |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn point_loss_examples() {
        let y = row(&[1.0, 2.0]);
        let p = row(&[1.0, 4.0]);
        assert_eq!(point_loss(y.view(), y.view(), BaseLoss::Mse).unwrap(), 0.0);
        assert_eq!(point_loss(y.view(), p.view(), BaseLoss::Mse).unwrap(), 2.0);
        assert_eq!(point_loss(y.view(), p.view(), BaseLoss::Mae).unwrap(), 1.0);
        assert!(point_loss(y.view(), row(&[1.0]).view(), BaseLoss::Mse).is_err());
    }

    #[test]
    fn tdt_loss_example() {
        let d = row(&[1.0, 2.0, -1.0]);
        let dh = row(&[0.0, 2.0, -1.0]);
        assert_eq!(tdt_loss(d.view(), d.view(), BaseLoss::Mse).unwrap(), 0.0);
        assert!((tdt_loss(d.view(), dh.view(), BaseLoss::Mse).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rho_examples() {
        let d = row(&[1.0, 2.0, -1.0]);
        let dh = row(&[0.5, -1.0, -2.0]);
        assert_eq!(rho(d.view(), d.view()).unwrap(), 0.0);
        assert!((rho(d.view(), dh.view()).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let neg = d.mapv(|v| -v);
        assert_eq!(rho(d.view(), neg.view()).unwrap(), 1.0);
        // a zero true change against a nonzero predicted change is a mismatch
        assert_eq!(rho(row(&[0.0]).view(), row(&[0.1]).view()).unwrap(), 1.0);
        assert_eq!(rho(row(&[0.0]).view(), row(&[0.0]).view()).unwrap(), 0.0);
    }

    #[test]
    fn perfect_prediction_is_zero_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random(&mut rng, (2, 5, 3));
        let ctx = random(&mut rng, (2, 4, 3));
        for mode in [LossMode::TDAlign, LossMode::BaselineOnly, LossMode::PlusLD] {
            let r = combined_loss(y.view(), y.view(), ctx.view(), &LossConfig::new(BaseLoss::Mse, mode)).unwrap();
            assert_eq!((r.loss_y, r.loss_d, r.rho, r.total), (0.0, 0.0, 0.0, 0.0));
            assert!(r.grad_wrt_prediction.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn all_signs_wrong_gives_point_loss() {
        // anchor 0, truth rising, prediction falling: every difference flips sign
        let y = row(&[1.0, 2.0, 3.0]);
        let p = row(&[-1.0, -2.0, -3.0]);
        let ctx = row(&[0.0]);
        let r = combined_loss(y.view(), p.view(), ctx.view(), &LossConfig::default()).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.total, r.loss_y);
    }

    #[test]
    fn totals_recompose_in_every_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random(&mut rng, (3, 6, 2));
        let p = random(&mut rng, (3, 6, 2));
        let ctx = random(&mut rng, (3, 4, 2));
        for base in [BaseLoss::Mse, BaseLoss::Mae] {
            for mode in [
                LossMode::BaselineOnly,
                LossMode::PlusLD,
                LossMode::RhoOnly,
                LossMode::FixedAlpha(0.3),
                LossMode::TDAlign,
            ] {
                let r = combined_loss(y.view(), p.view(), ctx.view(), &LossConfig::new(base, mode)).unwrap();
                let expect = match mode {
                    LossMode::BaselineOnly => r.loss_y,
                    LossMode::PlusLD => r.loss_y + r.loss_d,
                    LossMode::RhoOnly => r.rho * r.loss_y,
                    LossMode::FixedAlpha(a) => a * r.loss_y + (1.0 - a) * r.loss_d,
                    _ => r.rho * r.loss_y + (1.0 - r.rho) * r.loss_d,
                };
                assert!((r.total - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn invalid_modes() {
        let y = row(&[1.0]);
        let ctx = row(&[0.0]);
        for mode in [
            LossMode::FixedAlpha(1.5),
            LossMode::FixedAlpha(-0.1),
            LossMode::LearnableAlpha,
        ] {
            assert!(combined_loss(y.view(), y.view(), ctx.view(), &LossConfig::new(BaseLoss::Mse, mode)).is_err());
        }
    }

    #[test]
    fn baseline_gradient_is_plain_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random(&mut rng, (2, 4, 2));
        let p = random(&mut rng, (2, 4, 2));
        let anchor = Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.0..1.0));
        let ctx = anchor_context(anchor.view());
        let g = loss_grad_wrt_prediction(
            y.view(),
            p.view(),
            ctx.view(),
            &LossConfig::new(BaseLoss::Mse, LossMode::BaselineOnly),
        )
        .unwrap();
        let m = y.len() as f64;
        Zip::from(&g).and(&p).and(&y).for_each(|&g, &p, &y| {
            assert!((g - 2.0 * (p - y) / m).abs() < 1e-15);
        });
    }

    #[test]
    fn tdalign_gradient_closed_form() {
        // element-wise formula for first-order MSE with rho held constant
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (b, h, n) = (2, 6, 2);
        let y = random(&mut rng, (b, h, n));
        let p = random(&mut rng, (b, h, n));
        let ctx = random(&mut rng, (b, 1, n));
        let r = combined_loss(y.view(), p.view(), ctx.view(), &LossConfig::default()).unwrap();
        let d = tdt(y.view(), ctx.view(), DiffSpec::FIRST_ORDER).unwrap();
        let dh = tdp(p.view(), ctx.view(), DiffSpec::FIRST_ORDER).unwrap();
        let m = (b * h * n) as f64;
        for bi in 0..b {
            for i in 0..h {
                for ni in 0..n {
                    let mut diff_term = dh[[bi, i, ni]] - d[[bi, i, ni]];
                    if i + 1 < h {
                        diff_term -= dh[[bi, i + 1, ni]] - d[[bi, i + 1, ni]];
                    }
                    let want =
                        r.rho * 2.0 / m * (p[[bi, i, ni]] - y[[bi, i, ni]]) + (1.0 - r.rho) * 2.0 / m * diff_term;
                    assert!((r.grad_wrt_prediction[[bi, i, ni]] - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn mae_subgradient_zero_at_kink() {
        let y = row(&[1.0, 2.0]);
        let ctx = row(&[0.0]);
        let g = loss_grad_wrt_prediction(
            y.view(),
            y.view(),
            ctx.view(),
            &LossConfig::new(BaseLoss::Mae, LossMode::PlusLD),
        )
        .unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn contiguous_and_strided_inputs_agree_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (b, h, n) = (
                rng.random_range(1..=4),
                rng.random_range(2..=9),
                rng.random_range(1..=3),
            );
            // every other variable of a wider array is not contiguous
            let wide_y = random(&mut rng, (b, h, 2 * n)).mapv(|v| (v * 4.0).round() / 4.0);
            let wide_p = random(&mut rng, (b, h, 2 * n)).mapv(|v| (v * 4.0).round() / 4.0);
            let ys = wide_y.slice(ndarray::s![.., .., ..;2]);
            let ps = wide_p.slice(ndarray::s![.., .., ..;2]);
            assert!(ys.as_slice().is_none());
            let (y, p) = (ys.to_owned(), ps.to_owned());
            let ctx = random(&mut rng, (b, 2, n));
            for base in [BaseLoss::Mse, BaseLoss::Mae] {
                for mode in [
                    LossMode::TDAlign,
                    LossMode::BaselineOnly,
                    LossMode::PlusLD,
                    LossMode::RhoOnly,
                    LossMode::FixedAlpha(0.25),
                ] {
                    let cfg = LossConfig::new(base, mode);
                    let fast = combined_loss(y.view(), p.view(), ctx.view(), &cfg).unwrap();
                    let slow = combined_loss(ys, ps, ctx.view(), &cfg).unwrap();
                    assert_eq!(fast, slow);
                }
            }
        }
    }
}
