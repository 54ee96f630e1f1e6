//! Experiment runner: multi-seed training, ablations, difference-spec and
//! noise sweeps, identity checks and report emission.

pub mod compare;
pub mod config;
pub mod error;
pub mod fingerprint;
pub mod report;
pub mod run;
pub mod verify;

use std::fs;
use std::path::Path;

pub use compare::{cmd_ablate, cmd_sweep_diff, cmd_sweep_noise, ComparisonTable, TableRow};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use report::cmd_report;
pub use run::{cmd_train, Progress, RunSummary, SeedSummary};
pub use verify::{cmd_verify_theory, TheoryReport, VerifyConfig};

use error::io_err;

/// Writes the configured dataset (unscaled) as CSV, preceded by a
/// `# fingerprint` comment line.
pub fn cmd_synth(config: &ExperimentConfig, path: &Path) -> Result<()> {
    config.validate()?;
    let series = config.load_series()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(series.names()).map_err(csv_err)?;
    for row in series.values().rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut text = format!("# fingerprint {}\n", config.fingerprint()).into_bytes();
    text.extend(body);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}
