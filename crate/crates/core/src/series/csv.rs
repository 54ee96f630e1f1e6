use std::path::Path;

use ndarray::Array2;

use super::SeriesMatrix;
use crate::error::{Error, Result};

/// Loads a header-first, comma-separated panel.
///
/// `date_column` names a column to exclude from the features. When `None`, a
/// column literally named `date` (any case) is excluded if present. Date
/// strings are only checked for ordering: when every value has the same
/// length (ISO-like timestamps), they must be strictly increasing. Lines
/// starting with `#` are skipped.
pub fn load_csv(path: impl AsRef<Path>, date_column: Option<&str>) -> Result<SeriesMatrix> {
    let path = path.as_ref();
    let csv_err = |e: ::csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(std::io::BufReader::new(file));

    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let date_idx = match date_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            message: format!("date column '{name}' not found in header"),
        })?),
        None => headers.iter().position(|h| h.eq_ignore_ascii_case("date")),
    };
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != date_idx).collect();
    if feature_idx.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no numeric columns".into(),
        });
    }
    let names: Vec<String> = feature_idx.iter().map(|&j| headers[j].to_string()).collect();

    let mut data = Vec::new();
    let mut dates: Vec<String> = Vec::new();
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // 1-based data row number, header excluded
        let row = r + 1;
        for &j in &feature_idx {
            let cell = record.get(j).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::NonNumericCell {
                        path: path.to_path_buf(),
                        row,
                        column: headers[j].to_string(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        if let Some(d) = date_idx {
            dates.push(record.get(d).unwrap_or("").to_string());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if rows < 2 {
        return Err(Error::TooShort(format!(
            "{}: need at least 2 data rows, found {rows}",
            path.display()
        )));
    }
    check_date_order(path, &dates)?;

    let values =
        Array2::from_shape_vec((rows, feature_idx.len()), data).map_err(|e| crate::error::shape(e.to_string()))?;
    SeriesMatrix::new(values, names)
}

fn check_date_order(path: &Path, dates: &[String]) -> Result<()> {
    let Some(first) = dates.first() else {
        return Ok(());
    };
    if dates.iter().any(|d| d.len() != first.len()) {
        return Ok(());
    }
    for (i, pair) in dates.windows(2).enumerate() {
        if pair[0] >= pair[1] {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                message: format!(
                    "date column not strictly increasing at data row {}: {:?} then {:?}",
                    i + 2,
                    pair[0],
                    pair[1]
                ),
            });
        }
    }
    Ok(())
}
