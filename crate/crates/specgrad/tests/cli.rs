use std::path::Path;
use std::process::{Command, Output};

use specgrad::commands::train::parse_log;
use specgrad::gcpf::FeatureFile;
use specgrad::table::{Format, Table};

fn specgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specgrad"))
        .args(args)
        .env_remove("SPECGRAD_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_table(o: &Output) -> Table {
    Table::from_csv(std::str::from_utf8(&o.stdout).unwrap()).unwrap()
}

fn read_table(p: &Path) -> Table {
    Table::from_csv(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn approx_table_writes_one_file_per_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = specgrad(&["approx-table", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let taylor = read_table(&dir.path().join("taylor.csv"));
    assert_eq!(taylor.columns, ["ratio", "deg50", "deg100", "deg200", "deg300"]);
    assert_eq!(taylor.rows.len(), 7);
    let c = taylor.column("deg100").unwrap();
    let v = taylor.row_by_key(0.99).unwrap()[c].as_f64().unwrap();
    assert!((v - 36.0).abs() < 1.0, "{v}");

    let pade = read_table(&dir.path().join("pade.csv"));
    for row in &pade.rows {
        for cell in &row[1..] {
            assert!(cell.as_f64().unwrap() <= 1e-9);
        }
    }
}

#[test]
fn zero_ratio_has_zero_error() {
    let o = specgrad(&["approx-table", "--kind", "taylor", "--ratios", "0"]);
    assert_eq!(code(&o), 0);
    let t = stdout_table(&o);
    assert_eq!(t.rows.len(), 1);
    assert!(t.rows[0][1..].iter().all(|c| c.as_f64() == Some(0.0)));
}

#[test]
fn approx_table_json_round_trips() {
    let o = specgrad(&["approx-table", "--kind", "pade", "--format", "json", "--degrees", "10,20", "--ratios", "0.5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let t = Table::from_json(&text).unwrap();
    assert_eq!(t.to_json(), text);
    assert_eq!(t.get("kind"), Some("pade"));
}

#[test]
fn bounds_rows() {
    let t = stdout_table(&specgrad(&["bounds"]));
    let max = |label: &str| t.row_by_name(label).unwrap()[2].as_f64().unwrap();
    assert!((max("SVD-Taylor") / 4.55e17 - 1.0).abs() < 0.01);
    assert_eq!(max("SVD-Trunc"), 1e10);
    assert!((max("SVD-TopN") / 4.5e15 - 1.0).abs() < 0.01);
    assert_eq!(t.row_by_name("SVD-Newton").unwrap()[2].as_str(), Some("n/a"));

    let single = stdout_table(&specgrad(&["bounds", "--precision", "single"]));
    for row in &single.rows {
        if row[0].as_str() == Some("SVD") {
            continue;
        }
        assert_eq!(row[4].as_str(), Some("true"), "{row:?}");
        if let Some(v) = row[2].as_f64() {
            assert!(v < 3.40e38);
        }
    }
}

fn gradcheck_report(o: &Output) -> serde_json::Value {
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    doc["report"].clone()
}

#[test]
fn gradcheck_exit_codes() {
    let ok = specgrad(&["gradcheck", "--scheme", "ordinary", "--d", "4", "--cond", "10"]);
    assert_eq!(code(&ok), 0);
    assert_eq!(gradcheck_report(&ok)["passed"], true);

    let pade = specgrad(&["gradcheck", "--scheme", "pade", "--d", "8", "--cond", "1e6"]);
    assert_eq!(code(&pade), 0);

    let ns = specgrad(&["gradcheck", "--scheme", "ns-backward", "--forward", "ns", "--iters", "8", "--d", "3"]);
    assert_eq!(code(&ns), 0);

    let bad = specgrad(&["gradcheck", "--scheme", "ordinary", "--cond", "1e16"]);
    assert_eq!(code(&bad), 1);
    assert_eq!(gradcheck_report(&bad)["passed"], false);
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(code(&specgrad(&["gradcheck", "--scheme", "pi"])), 64);
    assert_eq!(code(&specgrad(&["gradcheck", "--forward", "ns", "--scheme", "pade"])), 64);
    assert_eq!(code(&specgrad(&["bounds", "--bogus"])), 64);
    assert_eq!(code(&specgrad(&["bounds", "--precision", "half"])), 64);
    assert_eq!(code(&specgrad(&["approx-table", "--ratios", "1.5"])), 64);
    assert_eq!(code(&specgrad(&[])), 64);
    assert_eq!(code(&specgrad(&["--help"])), 0);
    assert_eq!(code(&specgrad(&["bounds", "--out", "/nonexistent-dir/x/bounds.csv"])), 74);
    assert_eq!(code(&specgrad(&["condition", "--input", "/nonexistent-dir/f.gcpf"])), 74);
}

#[test]
fn condition_of_identity_covariances() {
    let t = stdout_table(&specgrad(&["condition", "--count", "5", "--cond", "1"]));
    let mean: f64 = t.get("mean_condition").unwrap().parse().unwrap();
    assert!((mean - 1.0).abs() < 1e-12);
    assert_eq!(t.get("ill_fraction"), Some("0"));
}

#[test]
fn condition_flags_eps_level_spectra() {
    let eps = f64::EPSILON;
    let cond = format!("{}", 1.0 / eps);
    let t = stdout_table(&specgrad(&["condition", "--count", "3", "--d", "4", "--n", "8", "--cond", &cond]));
    assert_eq!(t.get("ill_fraction"), Some("1"));
    assert!(t.rows.iter().all(|r| r[4].as_str() == Some("true")));
}

#[test]
fn condition_matches_closed_form_for_2x2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("f.gcpf");
    let o = specgrad(&["gen-features", "--count", "6", "--d", "2", "--n", "10", "--seed", "5", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let ff = FeatureFile::from_bytes(&std::fs::read(&file).unwrap()).unwrap();
    let t = stdout_table(&specgrad(&["condition", "--input", file.to_str().unwrap()]));
    let mut direct = Vec::new();
    for b in &ff.blocks {
        // Covariance entries by hand, then the 2x2 eigenvalues in closed form.
        let n = b.cols() as f64;
        let mean = |i: usize| b.row(i).iter().sum::<f64>() / n;
        let (m0, m1) = (mean(0), mean(1));
        let cov = |i: usize, mi: f64, j: usize, mj: f64| {
            b.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - mi) * (y - mj)).sum::<f64>() / n
        };
        let (a, bb, c) = (cov(0, m0, 0, m0), cov(0, m0, 1, m1), cov(1, m1, 1, m1));
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + bb * bb).sqrt();
        direct.push((mid + rad) / (mid - rad));
    }
    for (row, want) in t.rows.iter().zip(&direct) {
        let got = row[3].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
    }
    let mean: f64 = t.get("mean_condition").unwrap().parse().unwrap();
    let want = direct.iter().sum::<f64>() / direct.len() as f64;
    assert!((mean - want).abs() <= 1e-10 * want);
}

#[test]
fn synthetic_and_file_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("f.gcpf");
    let args = ["--count", "4", "--d", "3", "--n", "9", "--cond", "1e3", "--seed", "11"];
    let mut gen = vec!["gen-features", "--out", file.to_str().unwrap()];
    gen.extend_from_slice(&args);
    assert_eq!(code(&specgrad(&gen)), 0);
    let mut synth = vec!["condition"];
    synth.extend_from_slice(&args);
    let a = stdout_table(&specgrad(&synth));
    let b = stdout_table(&specgrad(&["condition", "--input", file.to_str().unwrap(), "--seed", "11"]));
    assert_eq!(a.rows, b.rows);
}

#[test]
fn train_toy_pure_newton_schulz() {
    let o = specgrad(&["train-toy", "--switch-frac", "1.0", "--steps", "200"]);
    assert_eq!(code(&o), 0);
    let log = parse_log(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(log.records.len(), 200);
    assert!(log.records.iter().all(|r| r.scheme == "ns(20)"));
    let head: f64 = log.records[..20].iter().map(|r| r.loss).sum::<f64>() / 20.0;
    let tail: f64 = log.records[180..].iter().map(|r| r.loss).sum::<f64>() / 20.0;
    assert!(tail < head, "{tail} vs {head}");
    assert_eq!(log.summary["outcome"], "completed");
    assert_eq!(log.config["switch_step"], serde_json::Value::Null);
}

#[test]
fn train_toy_is_deterministic() {
    let a = specgrad(&["train-toy", "--seed", "7", "--steps", "120"]);
    let b = specgrad(&["train-toy", "--seed", "7", "--steps", "120"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = specgrad(&["train-toy", "--seed", "8", "--steps", "120"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn train_toy_divergence_exits_2_with_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("log.jsonl");
    let o = specgrad(&["train-toy", "--lr", "1e15", "--steps", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let log = parse_log(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(log.summary["outcome"], "diverged");
    let at = log.summary["diverged_step"].as_u64().unwrap() as usize;
    assert_eq!(log.records.len(), at);
}

#[test]
fn train_toy_topn_on_fine_data_reports_outcome() {
    // Either outcome is legitimate; the exit code must match the log.
    let o = specgrad(&["train-toy", "--backward", "topn", "--topn", "2", "--d", "8", "--dataset", "fine", "--steps", "200"]);
    let log = parse_log(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    let want = if log.summary["outcome"] == "completed" { 0 } else { 2 };
    assert_eq!(code(&o), want);
    assert_eq!(log.config["post_switch_scheme"], "topn(2)");
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# bounds settings\nprecision=single\ndegree=50\nseed=9\n").unwrap();
    let t = stdout_table(&specgrad(&["bounds", "--config", conf.to_str().unwrap(), "--degree", "20"]));
    assert_eq!(t.get("precision"), Some("single"));
    assert_eq!(t.get("degree"), Some("20"));
    assert_eq!(t.get("seed"), Some("9"));
}

#[test]
fn seed_falls_back_to_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_specgrad")).args(["bounds"]).env("SPECGRAD_SEED", "42").output().unwrap();
    assert_eq!(stdout_table(&o).get("seed"), Some("42"));
    let o = Command::new(env!("CARGO_BIN_EXE_specgrad")).args(["bounds", "--seed", "3"]).env("SPECGRAD_SEED", "42").output().unwrap();
    assert_eq!(stdout_table(&o).get("seed"), Some("3"));
    let o = Command::new(env!("CARGO_BIN_EXE_specgrad")).args(["bounds"]).env("SPECGRAD_SEED", "x").output().unwrap();
    assert_eq!(code(&o), 64);
}

#[test]
fn outputs_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let out = dir.path().join(format!("bounds.{format}"));
        assert_eq!(code(&specgrad(&["bounds", "--format", format, "--out", out.to_str().unwrap()])), 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let f = if format == "csv" { Format::Csv } else { Format::Json };
        let t = Table::parse(&text, f).unwrap();
        assert_eq!(t.render(f), text);
    }
}
