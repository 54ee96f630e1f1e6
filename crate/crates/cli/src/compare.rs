//! Commands that train several configurations on the same data and seeds and
//! tabulate their summaries.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tdalign_core::{DiffSpec, MetricsReport};

use crate::config::{ExperimentConfig, ModeName};
use crate::error::{io_err, CliError, Result};
use crate::run::{cmd_train_on, write_json, Progress, RunSummary};

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Setting label (loss mode, diff spec or noise variance).
    pub setting: String,
    pub loss_mode: String,
    pub diff_order: usize,
    pub diff_interval: usize,
    pub train_noise_variance: f64,
    pub fingerprint: String,
    pub n_seeds: usize,
    pub extra_params: usize,
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

impl TableRow {
    fn new(setting: String, summary: &RunSummary) -> Self {
        let c = &summary.config;
        TableRow {
            setting,
            loss_mode: c.loss_mode.as_str().to_string(),
            diff_order: c.diff_order,
            diff_interval: c.diff_interval,
            train_noise_variance: c.train_noise_variance,
            fingerprint: summary.fingerprint.clone(),
            n_seeds: summary.seeds.len(),
            extra_params: summary.extra_params,
            mean: summary.mean,
            std: summary.std,
        }
    }
}

/// A comparison table plus the full summaries it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub kind: String,
    pub base_fingerprint: String,
    pub rows: Vec<TableRow>,
    pub runs: Vec<RunSummary>,
}

impl ComparisonTable {
    pub fn run(&self, setting: &str) -> Option<&RunSummary> {
        self.rows
            .iter()
            .position(|r| r.setting == setting)
            .map(|i| &self.runs[i])
    }

    /// JSON with every `wall_clock` member removed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("table serializes");
        for run in v["runs"].as_array_mut().expect("runs array") {
            run.as_object_mut().expect("object").remove("wall_clock");
        }
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    fn write(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        let path = out.join(format!("{}.csv", self.kind));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let mut header = vec![
            "setting",
            "loss_mode",
            "diff_order",
            "diff_interval",
            "train_noise_variance",
            "fingerprint",
            "n_seeds",
            "extra_params",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        for m in MetricsReport::NAMES {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        w.write_record(&header).map_err(|e| csv_err(&path, e))?;
        for r in &self.rows {
            let mut rec = vec![
                r.setting.clone(),
                r.loss_mode.clone(),
                r.diff_order.to_string(),
                r.diff_interval.to_string(),
                r.train_noise_variance.to_string(),
                r.fingerprint.clone(),
                r.n_seeds.to_string(),
                r.extra_params.to_string(),
            ];
            for (m, s) in r.mean.values().iter().zip(r.std.values()) {
                rec.push(m.to_string());
                rec.push(s.to_string());
            }
            w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(io_err(&path))?;
        write_json(&out.join(format!("{}.json", self.kind)), self)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Every run must have seen the same data and batch order seed by seed.
fn check_same_data(a: &RunSummary, b: &RunSummary) -> Result<()> {
    for (x, y) in a.seeds.iter().zip(&b.seeds) {
        if x.data_fingerprint != y.data_fingerprint {
            return Err(CliError::IdentityViolation(format!(
                "seed {} saw different data in runs {} and {}",
                x.seed, a.fingerprint, b.fingerprint
            )));
        }
    }
    Ok(())
}

fn build(
    kind: &str,
    base: &ExperimentConfig,
    cells: Vec<(String, ExperimentConfig)>,
    out: &Path,
    progress: Progress,
    same_data: bool,
) -> Result<ComparisonTable> {
    base.validate()?;
    for (_, c) in &cells {
        c.validate()?;
    }
    let raw = base.load_series()?;
    let mut rows = Vec::new();
    let mut runs: Vec<RunSummary> = Vec::new();
    for (setting, config) in cells {
        progress.note(format!("{kind}: {setting}"));
        let summary = cmd_train_on(&config, &raw, out, progress)?;
        if same_data {
            if let Some(first) = runs.first() {
                check_same_data(first, &summary)?;
            }
        }
        rows.push(TableRow::new(setting, &summary));
        runs.push(summary);
    }
    let table = ComparisonTable {
        kind: kind.to_string(),
        base_fingerprint: base.fingerprint(),
        rows,
        runs,
    };
    table.write(out)?;
    Ok(table)
}

/// Baseline, `+ L_D`, `+ rho`, learnable alpha and the full objective on
/// identical data and seeds.
pub fn cmd_ablate(config: &ExperimentConfig, out: &Path, progress: Progress) -> Result<ComparisonTable> {
    let cells = ModeName::ABLATION
        .into_iter()
        .map(|mode| {
            let mut c = config.clone();
            c.loss_mode = mode;
            c.alpha = None;
            (mode.as_str().to_string(), c)
        })
        .collect();
    build("ablation", config, cells, out, progress, true)
}

/// Difference specs swept by `sweep-diff`: every order in `tau_list` at
/// interval 1, then every interval in `k_list` at order 1, without repeats.
pub fn diff_grid(tau_list: &[usize], k_list: &[usize]) -> Vec<(usize, usize)> {
    let mut grid: Vec<(usize, usize)> = tau_list.iter().map(|&t| (t, 1)).collect();
    for &k in k_list {
        if !grid.contains(&(1, k)) {
            grid.push((1, k));
        }
    }
    grid
}

pub fn cmd_sweep_diff(config: &ExperimentConfig, out: &Path, progress: Progress) -> Result<ComparisonTable> {
    let grid = diff_grid(&config.tau_list, &config.k_list);
    if grid.is_empty() {
        return Err(CliError::Config("fields `tau_list` and `k_list` are both empty".into()));
    }
    let mut cells = Vec::new();
    for (order, interval) in grid {
        DiffSpec::new(order, interval)
            .and_then(|d| d.validate_for(config.horizon))
            .map_err(|e| CliError::Config(format!("diff spec tau={order}, k={interval}: {e}")))?;
        let mut c = config.clone();
        c.loss_mode = ModeName::Tdalign;
        c.alpha = None;
        c.diff_order = order;
        c.diff_interval = interval;
        cells.push((format!("tau={order},k={interval}"), c));
    }
    build("sweep_diff", config, cells, out, progress, true)
}

/// Baseline and full objective trained on noisy copies of the training split
/// for every variance in `noise_variances`; validation and test stay clean.
pub fn cmd_sweep_noise(config: &ExperimentConfig, out: &Path, progress: Progress) -> Result<ComparisonTable> {
    if config.noise_variances.is_empty() {
        return Err(CliError::Config("field `noise_variances` is empty".into()));
    }
    let mut cells = Vec::new();
    for &variance in &config.noise_variances {
        for mode in [ModeName::Baseline, ModeName::Tdalign] {
            let mut c = config.clone();
            c.loss_mode = mode;
            c.alpha = None;
            c.train_noise_variance = variance;
            cells.push((format!("{}@{variance}", mode.as_str()), c));
        }
    }
    build("sweep_noise", config, cells, out, progress, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shares_the_first_order_cell() {
        assert_eq!(diff_grid(&[1, 2], &[1]), vec![(1, 1), (2, 1)]);
        assert_eq!(diff_grid(&[1, 2, 3, 4], &[1, 6, 12, 24, 48]).len(), 8);
        assert_eq!(diff_grid(&[], &[6]), vec![(1, 6)]);
    }
}
