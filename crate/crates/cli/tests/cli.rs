use std::fs;
use std::path::Path;
use std::process::Command;

use tdalign_cli::config::ModeName;
use tdalign_cli::report::{cmd_report, tidy_csv};
use tdalign_cli::{
    cmd_ablate, cmd_sweep_diff, cmd_sweep_noise, cmd_synth, cmd_train, cmd_verify_theory, ExperimentConfig, Progress,
    RunSummary, VerifyConfig,
};
use tdalign_core::forecaster::read_checkpoint;
use tdalign_core::series::{load_csv, make_windows, ShortSeries};
use tdalign_core::trainer::{evaluate, EpochRecord};
use tdalign_core::MetricsReport;

const QUIET: Progress = Progress { quiet: true };

fn tiny(extra: &str) -> ExperimentConfig {
    let json = format!(
        r#"{{"dataset": "ar1", "length": 400, "n_vars": 2, "lookback": 16, "horizon": 8,
            "model": "linear", "epochs": 3, "batch_size": 16, "lr": 0.01 {extra}}}"#
    );
    ExperimentConfig::from_json(&json).unwrap()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn single_seed_has_zero_std() {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_train(&tiny(r#", "seeds": [3]"#), dir.path(), QUIET).unwrap();
    assert_eq!(s.seeds.len(), 1);
    assert_eq!(s.std.values(), [0.0; 5]);
    assert_eq!(s.mean, s.seeds[0].test);
}

#[test]
fn summary_statistics_recompute_from_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_train(&tiny(r#", "seeds": [0, 1, 2]"#), dir.path(), QUIET).unwrap();
    let on_disk: RunSummary =
        serde_json::from_str(&read(&dir.path().join(&s.fingerprint).join("summary.json"))).unwrap();
    assert_eq!(on_disk.deterministic_json(), s.deterministic_json());
    for (k, name) in MetricsReport::NAMES.iter().enumerate() {
        let v = s.metric(name);
        let mean = v.iter().sum::<f64>() / 3.0;
        let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0).sqrt();
        assert_eq!(s.mean.values()[k], mean);
        assert_eq!(s.std.values()[k], std);
    }
}

#[test]
fn rerun_is_byte_identical_outside_wall_clock() {
    let config = tiny(r#", "seeds": [0, 1]"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = cmd_train(&config, a.path(), QUIET).unwrap();
    let sb = cmd_train(&config, b.path(), QUIET).unwrap();
    assert_eq!(sa.deterministic_json(), sb.deterministic_json());
    for seed in [0, 1] {
        let rel = format!("{}/seed-{seed}/checkpoint.txt", sa.fingerprint);
        assert_eq!(read(&a.path().join(&rel)), read(&b.path().join(&rel)));
    }
}

#[test]
fn artifacts_embed_the_fingerprint_and_checkpoint_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(r#", "seeds": [5]"#);
    let s = cmd_train(&config, dir.path(), QUIET).unwrap();
    let fp = config.fingerprint();
    assert_eq!(s.fingerprint, fp);
    let seed_dir = dir.path().join(&fp).join("seed-5");
    for name in ["train_report.csv", "checkpoint.txt", "metrics.json"] {
        assert!(read(&seed_dir.join(name)).contains(&fp), "{name} lacks the fingerprint");
    }
    assert!(read(&seed_dir.join("train_report.csv")).contains("# defaulted lr_decay=0.5"));

    let params = read_checkpoint(std::io::BufReader::new(
        fs::File::open(seed_dir.join("checkpoint.txt")).unwrap(),
    ))
    .unwrap();
    let data = tdalign_cli::run::prepare(&config, &config.load_series().unwrap(), 5).unwrap();
    let test = make_windows(&data.test, 16, 8, 1, ShortSeries::Error).unwrap();
    assert_eq!(evaluate(&params, &test).unwrap(), s.seeds[0].test);
}

#[test]
fn too_short_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(r#", "length": 30"#);
    assert!(cmd_train(&config, dir.path(), QUIET).is_err());
}

#[test]
fn ablation_on_a_constant_series_is_exact_and_shares_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flat.csv");
    let mut text = String::from("date,a,b\n");
    for t in 0..200 {
        text.push_str(&format!("2020-01-01 {:02}:{:02},4.5,-2\n", t / 60, t % 60));
    }
    fs::write(&csv, text).unwrap();
    let json = format!(
        r#"{{"dataset": "csv", "path": {:?}, "lookback": 12, "horizon": 6, "kernel": 5, "epochs": 2, "seeds": [0, 1]}}"#,
        csv.display().to_string()
    );
    let config = ExperimentConfig::from_json(&json).unwrap();
    let out = dir.path().join("out");
    let table = cmd_ablate(&config, &out, QUIET).unwrap();
    let settings: Vec<&str> = table.rows.iter().map(|r| r.setting.as_str()).collect();
    assert_eq!(
        settings,
        ["baseline", "plus_ld", "rho_only", "learnable_alpha", "tdalign"]
    );
    for (row, run) in table.rows.iter().zip(&table.runs) {
        assert_eq!(row.mean.values(), [0.0; 5], "{}", row.setting);
        for (a, b) in run.seeds.iter().zip(&table.runs[0].seeds) {
            assert_eq!(a.data_fingerprint, b.data_fingerprint);
        }
    }
    assert_eq!(table.rows[3].extra_params, 1);
    assert!(table
        .rows
        .iter()
        .filter(|r| r.setting != "learnable_alpha")
        .all(|r| r.extra_params == 0));

    let csv_text = read(&out.join("ablation.csv"));
    assert_eq!(csv_text.lines().count(), 6);
    for (line, row) in csv_text.lines().skip(1).zip(&table.rows) {
        assert!(line.contains(&row.fingerprint));
    }
    let json: serde_json::Value = serde_json::from_str(&read(&out.join("ablation.json"))).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn diff_sweep_first_cell_matches_plain_training() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(r#", "seeds": [0, 1], "tau_list": [1, 2], "k_list": [1]"#);
    let table = cmd_sweep_diff(&config, dir.path(), QUIET).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!((table.rows[1].diff_order, table.rows[1].diff_interval), (2, 1));

    let other = tempfile::tempdir().unwrap();
    let plain = cmd_train(&config, other.path(), QUIET).unwrap();
    assert_eq!(table.runs[0].deterministic_json(), plain.deterministic_json());
}

#[test]
fn diff_sweep_rejects_specs_too_long_for_the_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(r#", "tau_list": [1], "k_list": [8]"#);
    let err = cmd_sweep_diff(&config, dir.path(), QUIET).unwrap_err().to_string();
    assert!(err.contains("tau=1, k=8"), "{err}");
}

#[test]
fn noise_sweep_pairs_modes_and_zero_variance_matches_training() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(r#", "seeds": [0], "noise_variances": [0, 0.5]"#);
    let table = cmd_sweep_noise(&config, dir.path(), QUIET).unwrap();
    let settings: Vec<&str> = table.rows.iter().map(|r| r.setting.as_str()).collect();
    assert_eq!(settings, ["baseline@0", "tdalign@0", "baseline@0.5", "tdalign@0.5"]);

    let other = tempfile::tempdir().unwrap();
    let plain = cmd_train(&config, other.path(), QUIET).unwrap();
    assert_eq!(
        table.run("tdalign@0").unwrap().deterministic_json(),
        plain.deterministic_json()
    );
    assert_ne!(table.rows[2].mean, table.rows[0].mean);

    assert!(ExperimentConfig::from_json(
        r#"{"dataset": "ar1", "lookback": 16, "horizon": 4, "noise_variances": [0.1, -0.1]}"#
    )
    .is_err());
}

#[test]
fn theory_checks_pass_and_repeat() {
    let config = VerifyConfig {
        mc_trials: 20_000,
        ..Default::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = cmd_verify_theory(&config, a.path()).unwrap();
    let rb = cmd_verify_theory(&config, b.path()).unwrap();
    assert!(ra.all_passed());
    assert_eq!(ra, rb);
    let psi = ra.checks.iter().find(|c| c.name == "psi_phi_zero").unwrap();
    assert_eq!(psi.max_error, 0.0);
    assert_eq!(
        read(&a.path().join("theory_report.csv")),
        read(&b.path().join("theory_report.csv"))
    );
}

#[test]
fn report_merges_runs_into_tidy_rows() {
    let dir = tempfile::tempdir().unwrap();
    let c1 = tiny(r#", "seeds": [0]"#);
    let c2 = tiny(r#", "seeds": [0], "loss_mode": "baseline""#);
    let s1 = cmd_train(&c1, dir.path(), QUIET).unwrap();
    let s2 = cmd_train(&c2, dir.path(), QUIET).unwrap();
    let run1 = dir.path().join(&s1.fingerprint).join("seed-0");

    let out = dir.path().join("report");
    let single = cmd_report(std::slice::from_ref(&run1), &out, false).unwrap();
    let epochs = single[0].epochs.len();
    assert_eq!(
        read(&out.join("report.csv")).lines().count(),
        1 + epochs * EpochRecord::METRICS.len()
    );

    let both = cmd_report(&[run1, dir.path().join(&s2.fingerprint)], &out, true).unwrap();
    let tidy = tidy_csv(&both).unwrap();
    let mut reader = csv::Reader::from_reader(tidy.as_bytes());
    let mut seen = std::collections::BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let expected = if rec[0].contains(&s1.fingerprint) {
            &s1.fingerprint
        } else {
            &s2.fingerprint
        };
        assert_eq!(&rec[1], expected.as_str());
        seen.insert(rec[1].to_string());
    }
    assert_eq!(seen.len(), 2);

    for metric in EpochRecord::METRICS {
        let svg = read(&out.join(format!("{metric}.svg")));
        let mut xml = quick_xml::Reader::from_str(&svg);
        let mut elements = 0;
        loop {
            match xml.read_event().unwrap() {
                quick_xml::events::Event::Eof => break,
                quick_xml::events::Event::Start(_) | quick_xml::events::Event::Empty(_) => elements += 1,
                _ => {}
            }
        }
        assert!(elements > 5);
        assert!(!svg.contains("href") && !svg.contains("url(") && !svg.contains("<image"));
        assert!(svg.contains(&s1.fingerprint) && svg.contains(&s2.fingerprint));
    }
}

#[test]
fn report_names_the_broken_file() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_report(&[dir.path().join("nowhere")], &dir.path().join("o"), false).unwrap_err();
    assert!(err.to_string().contains("nowhere"));

    let run = dir.path().join("broken");
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join("train_report.csv"), "# seed 0\nepoch,train_ly\n0,1\n").unwrap();
    let err = cmd_report(std::slice::from_ref(&run), &dir.path().join("o"), false).unwrap_err();
    assert!(err.to_string().contains("broken"), "{err}");
}

#[test]
fn synth_round_trips_through_the_loader() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny("");
    let path = dir.path().join("data/ar1.csv");
    cmd_synth(&config, &path).unwrap();
    assert!(read(&path).starts_with(&format!("# fingerprint {}", config.fingerprint())));
    let back = load_csv(&path, None).unwrap();
    assert_eq!(back.values(), config.load_series().unwrap().values());
}

#[test]
fn ablation_mode_order() {
    let names: Vec<&str> = ModeName::ABLATION.iter().map(|m| m.as_str()).collect();
    assert_eq!(names, ["baseline", "plus_ld", "rho_only", "learnable_alpha", "tdalign"]);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdalign"))
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(
        bin().arg("train").arg("--bogus").output().unwrap().status.code(),
        Some(1)
    );

    let bad = write_config(
        dir.path(),
        r#"{"dataset": "ar1", "lookback": 8, "horizon": 4, "typo": 1}"#,
    );
    let out = bin().args(["train", "--quiet", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo"));

    let diverge = write_config(
        dir.path(),
        r#"{"dataset": "ar1", "length": 300, "n_vars": 1, "lookback": 8, "horizon": 4, "model": "linear", "lr": 1e300, "epochs": 2}"#,
    );
    let out = bin()
        .args(["train", "--quiet", "--seeds", "0", "--out"])
        .arg(dir.path().join("o"))
        .arg("--config")
        .arg(&diverge)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn binary_train_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dataset": "sine", "length": 300, "n_vars": 2, "lookback": 12, "horizon": 6, "model": "dlinear", "kernel": 5, "epochs": 2}"#,
    );
    let out_dir = dir.path().join("runs");
    let status = bin()
        .args(["train", "--quiet", "--seeds", "7,8", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let fp_dir = fs::read_dir(&out_dir).unwrap().next().unwrap().unwrap().path();
    let summary: RunSummary = serde_json::from_str(&read(&fp_dir.join("summary.json"))).unwrap();
    assert_eq!(summary.config.seeds, vec![7, 8]);
    assert!(fp_dir.join("seed-7/train_report.csv").is_file());
    assert!(fp_dir.join("seed-8/checkpoint.txt").is_file());

    let report_dir = dir.path().join("rep");
    let status = bin()
        .arg("report")
        .arg(&fp_dir)
        .arg("--svg")
        .arg("--quiet")
        .arg("--out")
        .arg(&report_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(report_dir.join("val_mse.svg").is_file());
}
