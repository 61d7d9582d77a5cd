use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tsfm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsfm"))
        .args(args)
        .current_dir(dir)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_detect_forecast_eval_report() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = tsfm(d, &["--seed", "4", "synth", "--kind", "additive_combo", "--param", "period=12", "--param", "amplitude=3", "--length", "400", "--count", "2", "-o", "s.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("s.jsonl")).unwrap().lines().count(), 2);

    let o = tsfm(d, &["detect", "s.jsonl", "-k", "1"]);
    assert!(o.status.success());
    let line: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    let period = line["periods"][0].as_f64().unwrap();
    assert!((period - 12.0).abs() < 0.2, "{period}");

    let o = tsfm(d, &["--quantiles", "0.1,0.5,0.9", "forecast", "s.jsonl", "--horizon", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(line["quantiles"].as_array().unwrap().len(), 5);
    assert_eq!(line["levels"].as_array().unwrap().len(), 3);
    assert_eq!(line["timestamps"][0], "2020-01-17 16:00:00");

    let o = tsfm(d, &["--parallelism", "2", "eval", "--data", "s.jsonl", "-o", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("seasonal_naive"));
    assert_eq!(std::fs::read_to_string(d.join("run/records.jsonl")).unwrap().lines().count(), 4);

    let o = tsfm(d, &["report", "run", "-o", "rep", "--model", "knn"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("rep/report.md").is_file());
    assert_eq!(std::fs::read_dir(d.join("rep/plots")).unwrap().count(), 2);
}

#[test]
fn usage_and_parse_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(tsfm(d, &["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(tsfm(d, &["--quantiles", "0.5,0.2", "eval", "--suite", "periodic"]).status.code(), Some(2));
    assert_eq!(tsfm(d, &["--features", "weather", "eval", "--suite", "periodic"]).status.code(), Some(2));
    assert_eq!(tsfm(d, &["--regressor", "knn", "--endpoint", "http://x", "eval", "--suite", "periodic"]).status.code(), Some(2));
    assert_eq!(tsfm(d, &["eval"]).status.code(), Some(2));

    std::fs::write(d.join("gap.csv"), "item_id,timestamp,target\na,2020-01-01 00:00,1\na,2020-01-01 01:00,1\na,2020-01-01 03:00,1\n").unwrap();
    let o = tsfm(d, &["eval", "--data", "gap.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`a`"), "{}", stderr(&o));
    assert!(!stderr(&o).contains('\x1b'));
}

#[test]
fn failed_tasks_exit_with_1() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // one series with too few observations in its history
    let mut target = vec!["null"; 100];
    for t in target.iter_mut().skip(52) {
        *t = "1.5";
    }
    target[60] = "2.5";
    let good: Vec<String> = (0..100).map(|t| format!("{}", (t as f64 * 0.3).sin() + 5.0)).collect();
    let body = format!(
        "{{\"id\": \"sparse\", \"start\": \"2020-01-01\", \"freq\": \"H\", \"target\": [{}]}}\n{{\"id\": \"ok\", \"start\": \"2020-01-01\", \"freq\": \"H\", \"target\": [{}]}}\n",
        target.join(","),
        good.join(",")
    );
    std::fs::write(d.join("d.jsonl"), body).unwrap();
    let o = tsfm(d, &["eval", "--data", "d.jsonl", "-o", "run"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
    assert_eq!(summary["n_evaluated"], 1);
}

#[test]
fn synth_suite_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let a = tsfm(d, &["--seed", "9", "synth", "--suite", "qualitative"]);
    let b = tsfm(d, &["--seed", "9", "synth", "--suite", "qualitative"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 8);
}
