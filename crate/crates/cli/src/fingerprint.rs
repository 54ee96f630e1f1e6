//! SHA-256 fingerprints of configurations and of the exact data a run sees.

use sha2::{Digest, Sha256};
use tdalign_core::series::Windows;
use tdalign_core::trainer::TrainState;
use tdalign_core::{ForecasterParams, SeriesMatrix, TrainConfig};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Incremental hasher over tagged numeric sections.
pub struct DataHasher(Sha256);

impl Default for DataHasher {
    fn default() -> Self {
        Self::new()
    }
}

impl DataHasher {
    pub fn new() -> Self {
        Self(Sha256::new())
    }

    fn tag(&mut self, tag: &str) {
        self.0.update((tag.len() as u64).to_le_bytes());
        self.0.update(tag.as_bytes());
    }

    pub fn usizes(&mut self, tag: &str, values: &[usize]) {
        self.tag(tag);
        self.0.update((values.len() as u64).to_le_bytes());
        for v in values {
            self.0.update((*v as u64).to_le_bytes());
        }
    }

    pub fn series(&mut self, tag: &str, series: &SeriesMatrix) {
        self.tag(tag);
        let v = series.values();
        self.0.update((v.nrows() as u64).to_le_bytes());
        self.0.update((v.ncols() as u64).to_le_bytes());
        for x in v.iter() {
            self.0.update(x.to_bits().to_le_bytes());
        }
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Hash of the scaled splits, the window layout and every planned epoch's
/// batch order. Two runs with equal data fingerprints see identical batches
/// in identical order.
pub fn data_fingerprint(
    splits: [&SeriesMatrix; 3],
    train: &Windows<'_>,
    init: &ForecasterParams,
    config: &TrainConfig,
) -> String {
    let mut h = DataHasher::new();
    for (tag, s) in ["train", "val", "test"].into_iter().zip(splits) {
        h.series(tag, s);
    }
    h.usizes("layout", &[train.lookback(), train.horizon(), config.batch_size]);
    h.usizes("starts", train.starts());
    let mut state = TrainState::new(init, config);
    for epoch in 0..config.epochs {
        h.usizes(&format!("order{epoch}"), &state.next_order(train.len(), config.shuffle));
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
