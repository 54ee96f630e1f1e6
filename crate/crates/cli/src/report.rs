//! Merges per-run training reports into one tidy CSV and optional SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tdalign_core::trainer::EpochRecord;
use tdalign_core::TrainReport;

use crate::error::{io_err, CliError, Result};

/// One parsed `train_report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurves {
    pub label: String,
    pub fingerprint: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

fn bad(path: &Path, message: impl Into<String>) -> CliError {
    CliError::BadArtifact {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_run(path: &Path, label: String) -> Result<RunCurves> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let (header, epochs) = TrainReport::read_csv(file).map_err(|e| bad(path, e.to_string()))?;
    let field = |key: &str| {
        header
            .iter()
            .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')))
            .map(str::trim)
            .ok_or_else(|| bad(path, format!("missing `{key}` header line")))
    };
    let fingerprint = field("fingerprint")?.to_string();
    let seed = field("seed")?
        .parse()
        .map_err(|_| bad(path, "unparsable `seed` header line"))?;
    if epochs.is_empty() {
        return Err(bad(path, "no epoch rows"));
    }
    Ok(RunCurves {
        label,
        fingerprint,
        seed,
        epochs,
    })
}

/// Report files under `dir`: its own `train_report.csv`, or those of its
/// `seed-*` subdirectories.
fn report_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let own = dir.join("train_report.csv");
    if own.is_file() {
        return Ok(vec![(dir.display().to_string(), own)]);
    }
    let mut found = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let entry = entry.map_err(io_err(dir))?;
            let sub = entry.path();
            let is_seed = sub
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("seed-"));
            if is_seed && sub.join("train_report.csv").is_file() {
                found.push((sub.display().to_string(), sub.join("train_report.csv")));
            }
        }
    }
    if found.is_empty() {
        return Err(bad(&own, "no train_report.csv found"));
    }
    found.sort();
    Ok(found)
}

pub fn collect_runs(dirs: &[PathBuf]) -> Result<Vec<RunCurves>> {
    let mut runs = Vec::new();
    for dir in dirs {
        for (label, path) in report_files(dir)? {
            runs.push(read_run(&path, label)?);
        }
    }
    Ok(runs)
}

/// `run,fingerprint,seed,epoch,metric,value`, one row per run, epoch and metric.
pub fn tidy_csv(runs: &[RunCurves]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| bad(Path::new("<tidy csv>"), e.to_string());
    w.write_record(["run", "fingerprint", "seed", "epoch", "metric", "value"])
        .map_err(err)?;
    for run in runs {
        for rec in &run.epochs {
            for (metric, value) in EpochRecord::METRICS.iter().zip(rec.metric_values()) {
                w.write_record([
                    run.label.as_str(),
                    run.fingerprint.as_str(),
                    &run.seed.to_string(),
                    &rec.epoch.to_string(),
                    metric,
                    &value.to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| bad(Path::new("<tidy csv>"), e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Standalone SVG line chart of one metric against epoch, one line per run.
pub fn svg_chart(metric: &str, runs: &[RunCurves]) -> String {
    let k = EpochRecord::METRICS
        .iter()
        .position(|m| *m == metric)
        .unwrap_or_else(|| panic!("unknown metric {metric}"));
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 70.0, 20.0, 40.0, 50.0 + 16.0 * runs.len() as f64);
    let points: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|r| {
            r.epochs
                .iter()
                .map(|e| (e.epoch as f64, e.metric_values()[k]))
                .filter(|(_, v)| v.is_finite())
                .collect()
        })
        .collect();
    let all = points.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let total_h = h + 16.0 * runs.len() as f64;
    let plot_w = w - left - right;
    let plot_h = total_h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let fps: Vec<&str> = runs.iter().map(|r| r.fingerprint.as_str()).collect();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{total_h}" viewBox="0 0 {w} {total_h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, "<title>{}</title>", xml_escape(metric)).unwrap();
    writeln!(s, "<desc>fingerprints: {}</desc>", xml_escape(&fps.join(" "))).unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{total_h}" fill="white"/>"#).unwrap();
    let (bx, by) = (left + plot_w, top + plot_h);
    writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {by} L{bx} {by}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        w / 2.0,
        xml_escape(metric)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        left + plot_w / 2.0,
        by + 32.0
    )
    .unwrap();
    for (v, y) in [(y0, by), (y1, top)] {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#,
            left - 6.0,
            y + 4.0,
            v
        )
        .unwrap();
    }
    for (v, x) in [(x0, left), (x1, bx)] {
        writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{v}</text>"#, by + 16.0).unwrap();
    }
    for (i, (run, pts)) in runs.iter().zip(&points).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        )
        .unwrap();
        let ly = by + 48.0 + 16.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{left}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            left + 20.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}">{} (seed {})</text>"#,
            left + 26.0,
            ly + 4.0,
            xml_escape(&run.label),
            run.seed
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.csv` and, with `svg`, one `<metric>.svg` per metric into `out`.
pub fn cmd_report(dirs: &[PathBuf], out: &Path, svg: bool) -> Result<Vec<RunCurves>> {
    if dirs.is_empty() {
        return Err(CliError::Config("report needs at least one run directory".into()));
    }
    let runs = collect_runs(dirs)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("report.csv");
    fs::write(&path, tidy_csv(&runs)?).map_err(io_err(&path))?;
    if svg {
        for metric in EpochRecord::METRICS {
            let path = out.join(format!("{metric}.svg"));
            fs::write(&path, svg_chart(metric, &runs)).map_err(io_err(&path))?;
        }
    }
    Ok(runs)
}
