//! Experiment configuration: one flat JSON object.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `dataset` | `"csv"`, `"ar1"`, `"sine"`, `"random_walk"` | required |
//! | `path`, `date_column` | string | csv only; `path` required |
//! | `length`, `n_vars`, `data_seed` | int | synthetic only; 20000, 7, 0 |
//! | `phi` | float | ar1 only; 0.9 |
//! | `sigma` | float | ar1 and random_walk; 1.0 |
//! | `periods`, `amplitudes`, `noise_sigma` | floats | sine only; [24, 168], [1, 0.5], 0.1 |
//! | `split` | [train, val, test] | [0.6, 0.2, 0.2] |
//! | `lookback`, `horizon` | int | required |
//! | `stride` | int | 1 |
//! | `model` | `"linear"`, `"dlinear"` | `"dlinear"` |
//! | `kernel` | odd int | 25 |
//! | `lr`, `lr_decay` | float | 0.005, 0.5 |
//! | `beta1`, `beta2`, `eps` | float | 0.9, 0.999, 1e-8 |
//! | `epochs`, `batch_size`, `patience` | int | 10, 32, 3 |
//! | `shuffle` | bool | true |
//! | `loss_base` | `"mse"`, `"mae"` | `"mse"` |
//! | `loss_mode` | `"baseline"`, `"plus_ld"`, `"rho_only"`, `"fixed_alpha"`, `"learnable_alpha"`, `"tdalign"` | `"tdalign"` |
//! | `alpha` | float in [0, 1] | fixed_alpha only, required there |
//! | `diff_order`, `diff_interval` | int | 1, 1 |
//! | `train_noise_variance` | float >= 0 | 0 |
//! | `seeds` | ints | [0, 1, 2, 3, 4] |
//! | `noise_variances` | floats | [0, 0.1, 0.2, 0.5, 1.0] |
//! | `tau_list`, `k_list` | ints | [1, 2, 3, 4], [1, 6, 12, 24, 48] |
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tdalign_core::series::{gen_ar1, gen_random_walk, gen_sine_mix, load_csv};
use tdalign_core::trainer::AdamConfig;
use tdalign_core::{BaseLoss, DiffSpec, LossConfig, LossMode, ModelKind, SeriesMatrix, SplitSpec, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Csv,
    Ar1,
    Sine,
    RandomWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Linear,
    #[default]
    Dlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseName {
    #[default]
    Mse,
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Baseline,
    PlusLd,
    RhoOnly,
    FixedAlpha,
    LearnableAlpha,
    #[default]
    Tdalign,
}

impl ModeName {
    /// The five settings compared by `ablate`, in table order.
    pub const ABLATION: [ModeName; 5] = [
        ModeName::Baseline,
        ModeName::PlusLd,
        ModeName::RhoOnly,
        ModeName::LearnableAlpha,
        ModeName::Tdalign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Baseline => "baseline",
            ModeName::PlusLd => "plus_ld",
            ModeName::RhoOnly => "rho_only",
            ModeName::FixedAlpha => "fixed_alpha",
            ModeName::LearnableAlpha => "learnable_alpha",
            ModeName::Tdalign => "tdalign",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,

    #[serde(default = "default_split")]
    pub split: [f64; 3],
    pub lookback: usize,
    pub horizon: usize,
    #[serde(default = "one")]
    pub stride: usize,

    #[serde(default)]
    pub model: ModelName,
    #[serde(default = "default_kernel")]
    pub kernel: usize,

    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "yes")]
    pub shuffle: bool,

    #[serde(default)]
    pub loss_base: BaseName,
    #[serde(default)]
    pub loss_mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub diff_order: usize,
    #[serde(default = "one")]
    pub diff_interval: usize,
    #[serde(default)]
    pub train_noise_variance: f64,

    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_noise_variances")]
    pub noise_variances: Vec<f64>,
    #[serde(default = "default_tau_list")]
    pub tau_list: Vec<usize>,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,

    /// Optimizer keys that were absent from the file and took tool defaults.
    #[serde(skip)]
    pub defaulted: Vec<&'static str>,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_split() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}
fn default_kernel() -> usize {
    tdalign_core::forecaster::DEFAULT_KERNEL
}
fn default_lr() -> f64 {
    0.005
}
fn default_lr_decay() -> f64 {
    0.5
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    32
}
fn default_patience() -> usize {
    3
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_noise_variances() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.5, 1.0]
}
fn default_tau_list() -> Vec<usize> {
    vec![1, 2, 3, 4]
}
fn default_k_list() -> Vec<usize> {
    vec![1, 6, 12, 24, 48]
}

const OPTIMIZER_KEYS: [&str; 9] = [
    "lr",
    "lr_decay",
    "beta1",
    "beta2",
    "eps",
    "epochs",
    "batch_size",
    "patience",
    "shuffle",
];

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut config: ExperimentConfig =
            serde_json::from_value(raw.clone()).map_err(|e| config_err(e.to_string()))?;
        config.defaulted = OPTIMIZER_KEYS.into_iter().filter(|k| raw.get(k).is_none()).collect();
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Minimal synthetic configuration for a `lookback -> horizon` task.
    pub fn synthetic(dataset: DatasetKind, lookback: usize, horizon: usize) -> Self {
        serde_json::from_value(serde_json::json!({
            "dataset": dataset,
            "lookback": lookback,
            "horizon": horizon,
        }))
        .expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<()> {
        let synthetic_only = [
            ("length", self.length.is_some()),
            ("n_vars", self.n_vars.is_some()),
            ("data_seed", self.data_seed.is_some()),
        ];
        let allowed: &[&str] = match self.dataset {
            DatasetKind::Csv => &["path", "date_column"],
            DatasetKind::Ar1 => &["length", "n_vars", "data_seed", "phi", "sigma"],
            DatasetKind::Sine => &["length", "n_vars", "data_seed", "periods", "amplitudes", "noise_sigma"],
            DatasetKind::RandomWalk => &["length", "n_vars", "data_seed", "sigma"],
        };
        let present = synthetic_only.into_iter().chain([
            ("path", self.path.is_some()),
            ("date_column", self.date_column.is_some()),
            ("phi", self.phi.is_some()),
            ("sigma", self.sigma.is_some()),
            ("periods", self.periods.is_some()),
            ("amplitudes", self.amplitudes.is_some()),
            ("noise_sigma", self.noise_sigma.is_some()),
        ]);
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(config_err(format!(
                    "field `{key}` does not apply to dataset `{}`",
                    self.dataset_name()
                )));
            }
        }
        match (&self.dataset, &self.path) {
            (DatasetKind::Csv, None) => return Err(config_err("field `path` is required for dataset `csv`")),
            (DatasetKind::Csv, Some(p)) if !p.is_file() => {
                return Err(config_err(format!("field `path`: {} does not exist", p.display())))
            }
            _ => {}
        }
        if self.horizon == 0 {
            return Err(config_err("field `horizon` must be at least 1"));
        }
        if self.lookback == 0 {
            return Err(config_err("field `lookback` must be at least 1"));
        }
        if self.stride == 0 {
            return Err(config_err("field `stride` must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("field `seeds` must not be empty"));
        }
        if let Some(v) = self.noise_variances.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(config_err(format!(
                "field `noise_variances`: variance {v} is negative or not finite"
            )));
        }
        if !(self.train_noise_variance >= 0.0 && self.train_noise_variance.is_finite()) {
            return Err(config_err(format!(
                "field `train_noise_variance` must be >= 0, got {}",
                self.train_noise_variance
            )));
        }
        match (self.loss_mode, self.alpha) {
            (ModeName::FixedAlpha, None) => {
                return Err(config_err("field `alpha` is required for loss_mode `fixed_alpha`"))
            }
            (ModeName::FixedAlpha, Some(_)) | (_, None) => {}
            (mode, Some(_)) => {
                return Err(config_err(format!(
                    "field `alpha` does not apply to loss_mode `{}`",
                    mode.as_str()
                )))
            }
        }
        SplitSpec::new(self.split[0], self.split[1], self.split[2]).map_err(|e| named("split", e))?;
        self.model_kind().map_err(|e| named("kernel", e))?;
        let train = self.train_config(self.seeds[0])?;
        train.validate().map_err(|e| config_err(e.to_string()))?;
        train
            .loss
            .diff
            .validate_for(self.horizon)
            .map_err(|e| named("diff_order", e))?;
        if self.dataset != DatasetKind::Csv {
            let len = self.length.unwrap_or(20000);
            let n = self.n_vars.unwrap_or(7);
            if len == 0 || n == 0 {
                return Err(config_err("fields `length` and `n_vars` must be positive"));
            }
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> &'static str {
        match self.dataset {
            DatasetKind::Csv => "csv",
            DatasetKind::Ar1 => "ar1",
            DatasetKind::Sine => "sine",
            DatasetKind::RandomWalk => "random_walk",
        }
    }

    pub fn model_kind(&self) -> tdalign_core::Result<ModelKind> {
        let kind = match self.model {
            ModelName::Linear => ModelKind::Linear,
            ModelName::Dlinear => ModelKind::DLinear { kernel: self.kernel },
        };
        if let ModelKind::DLinear { kernel } = kind {
            tdalign_core::forecaster::ForecasterParams::init(kind, self.lookback, 1, 0).map_err(|_| {
                tdalign_core::Error::InvalidParameter(format!(
                    "kernel {kernel} must be odd and at most 2 * lookback - 1"
                ))
            })?;
        }
        Ok(kind)
    }

    pub fn loss_mode(&self) -> LossMode {
        match self.loss_mode {
            ModeName::Baseline => LossMode::BaselineOnly,
            ModeName::PlusLd => LossMode::PlusLD,
            ModeName::RhoOnly => LossMode::RhoOnly,
            ModeName::FixedAlpha => LossMode::FixedAlpha(self.alpha.unwrap_or(0.5)),
            ModeName::LearnableAlpha => LossMode::LearnableAlpha,
            ModeName::Tdalign => LossMode::TDAlign,
        }
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let base = match self.loss_base {
            BaseName::Mse => BaseLoss::Mse,
            BaseName::Mae => BaseLoss::Mae,
        };
        let diff = DiffSpec::new(self.diff_order, self.diff_interval).map_err(|e| named("diff_order", e))?;
        Ok(TrainConfig {
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            lr_decay: self.lr_decay,
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            seed,
            loss: LossConfig::new(base, self.loss_mode()).with_diff(diff),
            shuffle: self.shuffle,
            diagnostics: true,
        })
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec::new(self.split[0], self.split[1], self.split[2]).expect("validated split")
    }

    /// Raw (unscaled) series described by the dataset fields.
    pub fn load_series(&self) -> Result<SeriesMatrix> {
        let len = self.length.unwrap_or(20000);
        let n = self.n_vars.unwrap_or(7);
        let seed = self.data_seed.unwrap_or(0);
        let series = match self.dataset {
            DatasetKind::Csv => {
                let path = self.path.as_ref().expect("validated path");
                load_csv(path, self.date_column.as_deref())?
            }
            DatasetKind::Ar1 => gen_ar1(self.phi.unwrap_or(0.9), self.sigma.unwrap_or(1.0), len, n, seed)?,
            DatasetKind::Sine => {
                let periods = self.periods.clone().unwrap_or_else(|| vec![24.0, 168.0]);
                let amplitudes = self.amplitudes.clone().unwrap_or_else(|| vec![1.0, 0.5]);
                gen_sine_mix(&periods, &amplitudes, self.noise_sigma.unwrap_or(0.1), len, n, seed)?
            }
            DatasetKind::RandomWalk => gen_random_walk(self.sigma.unwrap_or(1.0), len, n, seed)?,
        };
        Ok(series)
    }

    /// Lowercase hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        crate::fingerprint::sha256_hex(self.canonical_json().as_bytes())
    }

    /// Compact JSON with every default filled in; the input of the fingerprint.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Header lines shared by every artifact of a run.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("fingerprint {}", self.fingerprint())];
        if !self.defaulted.is_empty() {
            let values: Vec<String> = self
                .defaulted
                .iter()
                .map(|k| format!("{k}={}", self.optimizer_value(k)))
                .collect();
            lines.push(format!("defaulted {}", values.join(" ")));
        }
        lines
    }

    fn optimizer_value(&self, key: &str) -> String {
        match key {
            "lr" => self.lr.to_string(),
            "lr_decay" => self.lr_decay.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "eps" => self.eps.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "patience" => self.patience.to_string(),
            "shuffle" => self.shuffle.to_string(),
            _ => String::new(),
        }
    }
}

fn named(field: &str, e: tdalign_core::Error) -> CliError {
    config_err(format!("field `{field}`: {e}"))
}
