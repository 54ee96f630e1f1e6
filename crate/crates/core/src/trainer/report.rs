use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a training report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_ly: f64,
    pub train_ld: f64,
    pub train_rho: f64,
    pub train_total: f64,
    pub val_mse: f64,
    pub val_mse_d: f64,
    pub val_rho: f64,
    pub seconds: f64,
}

impl EpochRecord {
    /// Deterministic columns, in CSV order (everything except `epoch` and `seconds`).
    pub const METRICS: [&'static str; 7] = [
        "train_ly",
        "train_ld",
        "train_rho",
        "train_total",
        "val_mse",
        "val_mse_d",
        "val_rho",
    ];

    pub fn metric_values(&self) -> [f64; 7] {
        [
            self.train_ly,
            self.train_ld,
            self.train_rho,
            self.train_total,
            self.val_mse,
            self.val_mse_d,
            self.val_rho,
        ]
    }
}

/// Components recorded for every optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss_y: f64,
    pub loss_d: f64,
    pub rho: f64,
    /// Weight on the point loss in the objective of this step.
    pub weight: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub batches: Vec<BatchRecord>,
    /// Index into `epochs` of the epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Learnable scalars beyond the forecaster (1 for the learnable-alpha mode).
    pub extra_params: usize,
    /// Final mixing weight of the learnable-alpha mode.
    pub final_alpha: Option<f64>,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch)
    }

    /// Writes one row per epoch. Each line of `header` is emitted first as a
    /// `# ` comment.
    pub fn write_csv(&self, header: &str, mut out: impl Write) -> Result<()> {
        for line in header.lines() {
            writeln!(out, "# {line}").map_err(csv_io)?;
        }
        let mut writer = csv::Writer::from_writer(out);
        for rec in &self.epochs {
            writer.serialize(rec).map_err(csv_err)?;
        }
        writer.flush().map_err(csv_io)?;
        Ok(())
    }

    /// Reads epoch rows back, returning them with the comment header lines
    /// (without the `# ` prefix).
    pub fn read_csv(mut input: impl Read) -> Result<(Vec<String>, Vec<EpochRecord>)> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(csv_io)?;
        let header = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim().to_string())
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<EpochRecord>, _>>()
            .map_err(csv_err)?;
        Ok((header, rows))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        path: "<train report>".into(),
        message: e.to_string(),
    }
}

fn csv_io(e: std::io::Error) -> Error {
    Error::Csv {
        path: "<train report>".into(),
        message: e.to_string(),
    }
}
