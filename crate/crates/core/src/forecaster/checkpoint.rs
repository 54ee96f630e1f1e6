//! Plain-text parameter checkpoints.
//!
//! ```text
//! tdalign-checkpoint 1
//! model dlinear 25
//! array trend.weight 96 336
//! <96 lines of 336 space-separated numbers>
//! array trend.bias 96
//! <one line of 96 numbers>
//! ...
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so reading a checkpoint
//! back reproduces every `f64` bit for bit. Lines starting with `#` are
//! comments and may appear anywhere.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::{ForecasterParams, ModelKind};
use crate::error::{Error, Result};

const MAGIC: &str = "tdalign-checkpoint 1";

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint(params: &ForecasterParams, mut out: impl Write) -> std::io::Result<()> {
    let mut text = String::new();
    writeln!(text, "{MAGIC}").unwrap();
    match params.kind() {
        ModelKind::Linear => writeln!(text, "model linear").unwrap(),
        ModelKind::DLinear { kernel } => writeln!(text, "model dlinear {kernel}").unwrap(),
    }
    let (h, l) = (params.horizon(), params.lookback());
    for (name, values) in params.named_arrays() {
        let row_len = if name.ends_with(".weight") {
            writeln!(text, "array {name} {h} {l}").unwrap();
            l
        } else {
            writeln!(text, "array {name} {h}").unwrap();
            h
        };
        for row in values.chunks(row_len) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(text, "{}", line.join(" ")).unwrap();
        }
    }
    out.write_all(text.as_bytes())
}

pub fn read_checkpoint(input: impl BufRead) -> Result<ForecasterParams> {
    let mut lines = input
        .lines()
        .map(|l| l.map_err(|e| bad(e.to_string())))
        .filter(|l| !matches!(l, Ok(text) if text.starts_with('#')));
    let mut next = move || -> Result<String> { lines.next().unwrap_or_else(|| Err(bad("unexpected end of file"))) };

    if next()?.trim() != MAGIC {
        return Err(bad("missing header line"));
    }
    let model = next()?;
    let fields: Vec<&str> = model.split_whitespace().collect();
    let kind = match fields.as_slice() {
        ["model", "linear"] => ModelKind::Linear,
        ["model", "dlinear", k] => ModelKind::DLinear {
            kernel: k.parse().map_err(|_| bad(format!("bad kernel {k:?}")))?,
        },
        _ => return Err(bad(format!("bad model line {model:?}"))),
    };

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for _ in 0..kind.heads() {
        let (dims, w) = read_array(&mut next, ".weight")?;
        let [h, l] = dims[..] else {
            return Err(bad("weight needs two dimensions"));
        };
        weights.push(Array2::from_shape_vec((h, l), w).map_err(|e| bad(e.to_string()))?);
        let (dims, b) = read_array(&mut next, ".bias")?;
        if dims.len() != 1 {
            return Err(bad("bias needs one dimension"));
        }
        biases.push(Array1::from(b));
    }
    ForecasterParams::from_arrays(kind, weights, biases)
}

fn read_array(next: &mut impl FnMut() -> Result<String>, suffix: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let header = next()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("array") {
        return Err(bad(format!("expected array header, got {header:?}")));
    }
    let name = parts.next().ok_or_else(|| bad("array without name"))?;
    if !name.ends_with(suffix) {
        return Err(bad(format!("expected a {suffix} array, got {name}")));
    }
    let dims: Vec<usize> = parts
        .map(|d| d.parse().map_err(|_| bad(format!("bad dimension {d:?} for {name}"))))
        .collect::<Result<_>>()?;
    let (rows, row_len) = match dims[..] {
        [h, l] => (h, l),
        [h] => (1, h),
        _ => return Err(bad(format!("bad dimensions for {name}"))),
    };
    let mut values = Vec::with_capacity(rows * row_len);
    for r in 0..rows {
        let line = next()?;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(format!("{name} row {r}: bad number {tok:?}")))?,
            );
        }
        if values.len() - before != row_len {
            return Err(bad(format!("{name} row {r}: expected {row_len} values")));
        }
    }
    Ok((dims, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round_trip(p: &ForecasterParams) -> ForecasterParams {
        let mut buf = Vec::new();
        write_checkpoint(p, &mut buf).unwrap();
        read_checkpoint(std::io::Cursor::new(buf)).unwrap()
    }

    fn bits(p: &ForecasterParams) -> Vec<u64> {
        p.named_arrays()
            .iter()
            .flat_map(|(_, v)| v.iter().map(|x| x.to_bits()))
            .collect()
    }

    proptest! {
        #[test]
        fn bit_exact(seed in any::<u64>(), scale in -300i32..300, dl in any::<bool>()) {
            let kind = if dl { ModelKind::DLinear { kernel: 3 } } else { ModelKind::Linear };
            let mut p = ForecasterParams::init(kind, 5, 3, seed).unwrap();
            for (_, v) in p.named_arrays_mut() {
                v.iter_mut().enumerate().for_each(|(i, x)| *x = (*x + i as f64 * 1e-3) * 10f64.powi(scale));
            }
            let back = round_trip(&p);
            prop_assert_eq!(back.kind(), p.kind());
            prop_assert_eq!(bits(&back), bits(&p));
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(std::io::Cursor::new("nope\n")).is_err());
        let p = ForecasterParams::init(ModelKind::Linear, 2, 2, 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(std::io::Cursor::new(truncated)).is_err());
    }

    #[test]
    fn comment_lines_are_skipped() {
        let p = ForecasterParams::init(ModelKind::DLinear { kernel: 3 }, 4, 2, 9).unwrap();
        let mut buf = b"# fingerprint abc\n".to_vec();
        write_checkpoint(&p, &mut buf).unwrap();
        let back = read_checkpoint(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(bits(&back), bits(&p));
    }
}
