//! Mini-batch training with Adam, early stopping on validation MSE, and
//! evaluation.
//!
//! Per batch: forward, build the target and prediction differences, compute
//! the point and difference losses and `rho`, combine them according to the
//! loss mode, back-propagate through the prediction into the model, and take
//! one Adam step.

mod adam;
mod report;

pub use adam::{adam_step, AdamConfig, AdamState, AlphaState};
pub use report::{BatchRecord, EpochRecord, TrainReport};

use std::time::Instant;

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::forecaster::{backward_prepared, forward_prepared, ForecasterParams, PreparedInput};
use crate::loss::{combined_loss, evaluate_metrics, point_loss_with_grad, LossConfig, LossMode, MetricsReport};
use crate::rng::{seeded, Stream};
use crate::series::{WindowBatch, Windows};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    /// Learning-rate multiplier applied once per completed epoch; 1 keeps it
    /// constant, 0.5 halves it every epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation-MSE improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub shuffle: bool,
    /// Compute the difference loss and `rho` for the record even when the
    /// objective does not use them (baseline mode).
    pub diagnostics: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            lr_decay: 1.0,
            epochs: 10,
            batch_size: 32,
            patience: 3,
            seed: 0,
            loss: LossConfig::default(),
            shuffle: true,
            diagnostics: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.loss.validate()?;
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(invalid(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Epoch means of the per-batch loss components.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub loss_y: f64,
    pub loss_d: f64,
    pub rho: f64,
    pub total: f64,
    pub batches: Vec<BatchRecord>,
    pub seconds: f64,
}

/// Mutable state carried across epochs of one run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub adam: AdamState,
    pub alpha: Option<AlphaState>,
    shuffle_rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(params: &ForecasterParams, config: &TrainConfig) -> Self {
        Self {
            adam: AdamState::new(params),
            alpha: matches!(config.loss.mode, LossMode::LearnableAlpha).then(AlphaState::default),
            shuffle_rng: seeded(config.seed, Stream::Shuffle),
        }
    }

    /// Window visiting order for the next epoch; advances the shuffle stream.
    pub fn next_order(&mut self, n_windows: usize, shuffle: bool) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n_windows).collect();
        if shuffle {
            order.shuffle(&mut self.shuffle_rng);
        }
        order
    }
}

struct StepOutcome {
    record: BatchRecord,
}

fn train_step(
    params: &mut ForecasterParams,
    batch: &WindowBatch,
    config: &TrainConfig,
    state: &mut TrainState,
    epoch: usize,
    index: usize,
) -> Result<StepOutcome> {
    let prepared = PreparedInput::new(params, batch.inputs.view())?;
    let prediction = forward_prepared(params, &prepared);

    let lean = !config.diagnostics && matches!(config.loss.mode, LossMode::BaselineOnly);
    let (record, grad) = if lean {
        let (loss_y, grad) = point_loss_with_grad(batch.targets.view(), prediction.view(), config.loss.base)?;
        let record = BatchRecord {
            epoch,
            batch: index,
            loss_y,
            loss_d: f64::NAN,
            rho: f64::NAN,
            weight: 1.0,
            total: loss_y,
        };
        (record, grad)
    } else {
        let mut loss_config = config.loss;
        if let Some(alpha) = &state.alpha {
            loss_config.mode = LossMode::FixedAlpha(alpha.alpha());
        }
        let report = combined_loss(
            batch.targets.view(),
            prediction.view(),
            batch.inputs.view(),
            &loss_config,
        )?;
        let record = BatchRecord {
            epoch,
            batch: index,
            loss_y: report.loss_y,
            loss_d: report.loss_d,
            rho: report.rho,
            weight: report.weight,
            total: report.total,
        };
        (record, report.grad_wrt_prediction)
    };
    if !record.total.is_finite() {
        return Err(Error::NonFiniteLoss { epoch, batch: index });
    }

    let grads = backward_prepared(params, &prepared, grad.view())?;
    adam_step(params, &grads, &mut state.adam, &config.adam)?;
    if let Some(alpha) = state.alpha.as_mut() {
        let g = alpha.logit_grad(record.loss_y, record.loss_d);
        alpha.step(g, &config.adam)?;
    }
    Ok(StepOutcome { record })
}

/// One pass over the training windows.
pub fn train_epoch(
    params: &mut ForecasterParams,
    windows: &Windows<'_>,
    config: &TrainConfig,
    state: &mut TrainState,
    epoch: usize,
) -> Result<EpochStats> {
    if windows.is_empty() {
        return Err(Error::TooShort("no training windows".into()));
    }
    let start = Instant::now();
    let order = state.next_order(windows.len(), config.shuffle);
    let mut batches = Vec::with_capacity(order.len().div_ceil(config.batch_size));
    for (index, chunk) in order.chunks(config.batch_size).enumerate() {
        let batch = windows.batch(chunk);
        batches.push(train_step(params, &batch, config, state, epoch, index)?.record);
    }
    let seconds = start.elapsed().as_secs_f64();
    let n = batches.len() as f64;
    let mean = |f: fn(&BatchRecord) -> f64| batches.iter().map(f).sum::<f64>() / n;
    Ok(EpochStats {
        loss_y: mean(|b| b.loss_y),
        loss_d: mean(|b| b.loss_d),
        rho: mean(|b| b.rho),
        total: mean(|b| b.total),
        batches,
        seconds,
    })
}

/// Windows per evaluation batch; only affects speed.
const EVAL_BATCH: usize = 256;

/// Predictions for every window, in window order.
pub fn predict(params: &ForecasterParams, windows: &Windows<'_>) -> Result<Array3<f64>> {
    let mut out = Array3::zeros((windows.len(), params.horizon(), windows.n_vars()));
    let idx: Vec<usize> = (0..windows.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let batch = windows.batch(chunk);
        let pred = forward_prepared(params, &PreparedInput::new(params, batch.inputs.view())?);
        out.slice_mut(ndarray::s![chunk[0]..chunk[0] + chunk.len(), .., ..])
            .assign(&pred);
    }
    Ok(out)
}

/// Metrics averaged over windows with equal weight.
pub fn evaluate(params: &ForecasterParams, windows: &Windows<'_>) -> Result<MetricsReport> {
    if windows.is_empty() {
        return Err(Error::TooShort("no evaluation windows".into()));
    }
    let total = windows.len() as f64;
    let mut acc = [0.0; 5];
    let idx: Vec<usize> = (0..windows.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let batch = windows.batch(chunk);
        let pred = forward_prepared(params, &PreparedInput::new(params, batch.inputs.view())?);
        let m = evaluate_metrics(batch.targets.view(), pred.view(), batch.anchor.view())?;
        // batch means weighted by window count give the per-window mean
        let w = chunk.len() as f64 / total;
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += w * v;
        }
    }
    Ok(MetricsReport::from_values(acc))
}

/// Trains until `epochs` or early stopping and returns the parameters of the
/// epoch with the lowest validation MSE.
pub fn fit(
    init: ForecasterParams,
    train: &Windows<'_>,
    val: &Windows<'_>,
    config: &TrainConfig,
) -> Result<(ForecasterParams, TrainReport)> {
    config.validate()?;
    config.loss.diff.validate_for(init.horizon())?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::TooShort(format!(
            "fit needs training and validation windows (got {} and {})",
            train.len(),
            val.len()
        )));
    }
    let mut params = init;
    let mut state = TrainState::new(&params, config);
    let mut report = TrainReport {
        extra_params: usize::from(state.alpha.is_some()),
        ..Default::default()
    };
    let mut best: Option<(f64, ForecasterParams)> = None;
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        let mut epoch_config = *config;
        epoch_config.adam.lr = config.adam.lr * config.lr_decay.powi(epoch as i32);
        let stats = train_epoch(&mut params, train, &epoch_config, &mut state, epoch)?;
        let val_metrics = evaluate(&params, val)?;
        report.epochs.push(EpochRecord {
            epoch,
            train_ly: stats.loss_y,
            train_ld: stats.loss_d,
            train_rho: stats.rho,
            train_total: stats.total,
            val_mse: val_metrics.mse,
            val_mse_d: val_metrics.mse_d,
            val_rho: val_metrics.rho,
            seconds: stats.seconds,
        });
        report.batches.extend(stats.batches);

        let improved = best.as_ref().is_none_or(|(b, _)| val_metrics.mse < *b);
        if improved {
            best = Some((val_metrics.mse, params.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                report.stopped_early = epoch + 1 < config.epochs;
                break;
            }
        }
    }
    report.final_alpha = state.alpha.as_ref().map(AlphaState::alpha);
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, report))
}
