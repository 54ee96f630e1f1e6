//! Single-configuration, multi-seed training runs and their artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! <fingerprint>/summary.json
//! <fingerprint>/seed-<s>/train_report.csv
//! <fingerprint>/seed-<s>/checkpoint.txt
//! <fingerprint>/seed-<s>/metrics.json
//! ```

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tdalign_core::forecaster::write_checkpoint;
use tdalign_core::series::{chronological_split, inject_gaussian_noise, make_windows, ShortSeries};
use tdalign_core::trainer::{evaluate, fit};
use tdalign_core::{ForecasterParams, MetricsReport, SeriesMatrix, TrainReport, ZScoreScaler};

use crate::config::ExperimentConfig;
use crate::error::{io_err, CliError, Result};
use crate::fingerprint::data_fingerprint;

/// Scaled train/val/test splits; val and test carry `lookback` rows of context.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: SeriesMatrix,
    pub val: SeriesMatrix,
    pub test: SeriesMatrix,
}

/// Split, fit the scaler on the clean training rows, scale, then add the
/// configured training noise (seeded by `seed`).
pub fn prepare(config: &ExperimentConfig, raw: &SeriesMatrix, seed: u64) -> Result<PreparedData> {
    let splits = chronological_split(raw, config.split_spec(), config.lookback)?;
    let (Some(val), Some(test)) = (splits.val, splits.test) else {
        return Err(CliError::Config(
            "field `split`: validation and test fractions must both be positive".into(),
        ));
    };
    let scaler = ZScoreScaler::fit(&splits.train)?;
    let train = scaler.transform(&splits.train)?;
    let train = inject_gaussian_noise(&train, config.train_noise_variance, seed)?;
    Ok(PreparedData {
        train,
        val: scaler.transform(&val)?,
        test: scaler.transform(&test)?,
    })
}

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub data_fingerprint: String,
    pub test: MetricsReport,
    pub params: ForecasterParams,
    pub report: TrainReport,
    pub seconds: f64,
}

pub fn run_seed(config: &ExperimentConfig, raw: &SeriesMatrix, seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let data = prepare(config, raw, seed)?;
    let (l, h, stride) = (config.lookback, config.horizon, config.stride);
    let train = make_windows(&data.train, l, h, stride, ShortSeries::Error)?;
    let val = make_windows(&data.val, l, h, stride, ShortSeries::Error)?;
    let test = make_windows(&data.test, l, h, stride, ShortSeries::Error)?;
    let train_config = config.train_config(seed)?;
    let kind = config.model_kind()?;
    let init = ForecasterParams::init(kind, l, h, seed)?;
    let data_fp = data_fingerprint([&data.train, &data.val, &data.test], &train, &init, &train_config);
    let (params, report) = fit(init, &train, &val, &train_config)?;
    let metrics = evaluate(&params, &test)?;
    Ok(SeedRun {
        seed,
        data_fingerprint: data_fp,
        test: metrics,
        params,
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub data_fingerprint: String,
    pub test: MetricsReport,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub final_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub total_seconds: f64,
    pub per_seed_seconds: Vec<f64>,
}

/// Per-seed test metrics with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub param_count: usize,
    pub extra_params: usize,
    pub seeds: Vec<SeedSummary>,
    pub mean: MetricsReport,
    pub std: MetricsReport,
    pub wall_clock: WallClock,
}

impl RunSummary {
    pub fn from_runs(config: &ExperimentConfig, runs: &[SeedRun], total_seconds: f64) -> Self {
        let reports: Vec<MetricsReport> = runs.iter().map(|r| r.test).collect();
        let (mean, std) = mean_std(&reports);
        RunSummary {
            fingerprint: config.fingerprint(),
            config: config.clone(),
            param_count: runs[0].params.param_count(),
            extra_params: runs[0].report.extra_params,
            seeds: runs
                .iter()
                .map(|r| SeedSummary {
                    seed: r.seed,
                    data_fingerprint: r.data_fingerprint.clone(),
                    test: r.test,
                    best_epoch: r.report.best_epoch,
                    epochs_run: r.report.epochs.len(),
                    stopped_early: r.report.stopped_early,
                    final_alpha: r.report.final_alpha,
                })
                .collect(),
            mean,
            std,
            wall_clock: WallClock {
                total_seconds,
                per_seed_seconds: runs.iter().map(|r| r.seconds).collect(),
            },
        }
    }

    /// Per-seed values of one metric, in seed order.
    pub fn metric(&self, name: &str) -> Vec<f64> {
        let k = MetricsReport::NAMES
            .iter()
            .position(|n| *n == name)
            .unwrap_or_else(|| panic!("unknown metric {name}"));
        self.seeds.iter().map(|s| s.test.values()[k]).collect()
    }

    pub fn median(&self, name: &str) -> f64 {
        median(&self.metric(name))
    }

    /// JSON with the `wall_clock` member removed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("summary serializes");
        v.as_object_mut().expect("object").remove("wall_clock");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

/// Mean and population standard deviation, metric by metric.
pub fn mean_std(reports: &[MetricsReport]) -> (MetricsReport, MetricsReport) {
    let n = reports.len() as f64;
    let mut mean = [0.0; 5];
    for r in reports {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 5];
    for r in reports {
        for ((s, v), m) in var.iter_mut().zip(r.values()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.map(|s| (s / n).sqrt());
    (MetricsReport::from_values(mean), MetricsReport::from_values(std))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_dir(out: &Path, config: &ExperimentConfig) -> PathBuf {
    out.join(config.fingerprint())
}

pub fn seed_dir(out: &Path, config: &ExperimentConfig, seed: u64) -> PathBuf {
    run_dir(out, config).join(format!("seed-{seed}"))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_seed_artifacts(dir: &Path, config: &ExperimentConfig, run: &SeedRun) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut header = config.header_lines();
    header.push(format!("data_fingerprint {}", run.data_fingerprint));
    header.push(format!("seed {}", run.seed));
    header.push(format!("loss_mode {}", config.loss_mode.as_str()));
    header.push(format!("best_epoch {}", run.report.best_epoch));
    let header = header.join("\n");

    let path = dir.join("train_report.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    run.report.write_csv(&header, BufWriter::new(file))?;

    let path = dir.join("checkpoint.txt");
    let mut text = String::new();
    for line in header.lines() {
        text.push_str(&format!("# {line}\n"));
    }
    let mut buf = text.into_bytes();
    write_checkpoint(&run.params, &mut buf).map_err(io_err(&path))?;
    fs::write(&path, buf).map_err(io_err(&path))?;

    let metrics = serde_json::json!({
        "fingerprint": config.fingerprint(),
        "data_fingerprint": run.data_fingerprint,
        "seed": run.seed,
        "loss_mode": config.loss_mode.as_str(),
        "test": run.test,
        "best_epoch": run.report.best_epoch,
        "epochs_run": run.report.epochs.len(),
        "stopped_early": run.report.stopped_early,
        "param_count": run.params.param_count(),
        "extra_params": run.report.extra_params,
        "final_alpha": run.report.final_alpha,
        "wall_clock": { "seconds": run.seconds },
    });
    write_json(&dir.join("metrics.json"), &metrics)
}

/// Progress sink; silent when `quiet`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Progress {
    pub quiet: bool,
}

impl Progress {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Trains every configured seed, writes the per-seed artifacts and the
/// summary, and returns the summary.
pub fn cmd_train(config: &ExperimentConfig, out: &Path, progress: Progress) -> Result<RunSummary> {
    config.validate()?;
    let raw = config.load_series()?;
    cmd_train_on(config, &raw, out, progress)
}

pub(crate) fn cmd_train_on(
    config: &ExperimentConfig,
    raw: &SeriesMatrix,
    out: &Path,
    progress: Progress,
) -> Result<RunSummary> {
    let start = Instant::now();
    let fp = config.fingerprint();
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let run = run_seed(config, raw, seed)?;
        progress.note(format!(
            "[{}] {} seed {seed}: mse {:.6} mse_d {:.6} rho {:.6} ({} epochs, {:.1}s)",
            &fp[..12],
            config.loss_mode.as_str(),
            run.test.mse,
            run.test.mse_d,
            run.test.rho,
            run.report.epochs.len(),
            run.seconds
        ));
        write_seed_artifacts(&seed_dir(out, config, seed), config, &run)?;
        runs.push(run);
    }
    let summary = RunSummary::from_runs(config, &runs, start.elapsed().as_secs_f64());
    write_json(&run_dir(out, config).join("summary.json"), &summary)?;
    Ok(summary)
}
