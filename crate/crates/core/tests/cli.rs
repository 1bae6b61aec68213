use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hiercpt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiercpt"))
        .current_dir(dir)
        .env_remove("HIERCPT_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn mse_bench_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = hiercpt(
        dir.path(),
        &["--out", "o", "mse-bench", "--test", "1", "--r", "2", "--q", "2", "--n", "20", "--reps", "2", "--seed", "7"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("o/mse_bench.csv"));
    assert_eq!(
        header,
        ["test", "r", "q", "n", "repetition", "mse_bayes", "mse_hier", "diff", "mc_diagnostics"]
    );
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let bayes: f64 = row[5].parse().unwrap();
        let hier: f64 = row[6].parse().unwrap();
        let diff: f64 = row[7].parse().unwrap();
        assert_eq!(bayes - hier, diff);
    }
}

#[test]
fn json_output_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["mse-bench", "--r", "2", "--q", "2", "--n", "20", "--reps", "1", "--seed", "3"];
    let mut a = vec!["--out", "c"];
    a.extend(base);
    let mut b = vec!["--out", "j", "--format", "json"];
    b.extend(base);
    assert!(hiercpt(dir.path(), &a).status.success());
    assert!(hiercpt(dir.path(), &b).status.success());
    let (header, rows) = read_csv(&dir.path().join("c/mse_bench.csv"));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("j/mse_bench.json")).unwrap()).unwrap();
    assert_eq!(doc["columns"], serde_json::json!(header));
    let jrow = doc["rows"][0].as_array().unwrap();
    assert_eq!(jrow.len(), rows[0].len());
    assert_eq!(jrow[5].as_f64().unwrap(), rows[0][5].parse::<f64>().unwrap());
}

#[test]
fn config_echo_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"reps": 3, "seed": 11, "r": [2], "q": [2], "n": [20]}"#).unwrap();
    let out = hiercpt(dir.path(), &["--out", "o", "--config", "cfg.json", "mse-bench", "--reps", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/config.json")).unwrap()).unwrap();
    assert_eq!(echo["command"], "mse-bench");
    assert_eq!(echo["reps"], 1);
    assert_eq!(echo["seed"], 11);
    let (_, rows) = read_csv(&dir.path().join("o/mse_bench.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn config_for_other_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"command": "fit"}"#).unwrap();
    let out = hiercpt(dir.path(), &["--out", "o", "--config", "cfg.json", "mse-bench"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn discretize_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "x,y\n1.5,a\n2.5,b\n0.1,a\n9,b\n3,a\n4,b\n").unwrap();
    fs::write(dir.path().join("g.dag"), "x |\ny | x\n").unwrap();
    let out = hiercpt(dir.path(), &["--out", "d", "discretize", "--input", "d.csv", "--bins", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("d/discretized.csv"));
    assert_eq!(header, ["x", "y"]);
    assert_eq!(rows.len(), 6);
    let bins: std::collections::BTreeSet<_> = rows.iter().map(|r| r[0].clone()).collect();
    assert_eq!(bins.len(), 2);
    assert!(dir.path().join("d/cut_points.txt").exists());

    for est in ["ml", "bdeu:1", "bdeu-classic", "hier"] {
        let out = hiercpt(
            dir.path(),
            &["--out", est, "fit", "--data", "d/discretized.csv", "--dag", "g.dag", "--estimator", est],
        );
        assert!(out.status.success(), "{est}: {}", String::from_utf8_lossy(&out.stderr));
        let (_, rows) = read_csv(&dir.path().join(est).join("fit.csv"));
        assert_eq!(rows.len(), 2);
        assert!(dir.path().join(est).join("cpts/001_y.csv").exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.dag"), "x |\n").unwrap();
    assert_eq!(hiercpt(dir.path(), &["--bogus"]).status.code(), Some(2));
    assert_eq!(hiercpt(dir.path(), &["--out", "o", "mse-bench", "--r", "1"]).status.code(), Some(3));
    assert_eq!(
        hiercpt(dir.path(), &["--out", "o", "fit", "--data", "missing.csv", "--dag", "g.dag"]).status.code(),
        Some(4)
    );
    fs::write(dir.path().join("cyc.dag"), "a | b\nb | a\n").unwrap();
    fs::write(dir.path().join("ab.csv"), "a,b\n0,1\n1,0\n").unwrap();
    let out = hiercpt(dir.path(), &["--out", "o", "fit", "--data", "ab.csv", "--dag", "cyc.dag"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("hiercpt: error:"));
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hiercpt(dir.path(), &["--out", "v", "validate", "--n-samples", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let (header, rows) = read_csv(&dir.path().join("v/validate.csv"));
    assert!(header.iter().any(|h| h == "pass"));
    assert!(!rows.is_empty());
}
