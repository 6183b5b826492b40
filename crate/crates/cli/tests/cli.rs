use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_likecard"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dataset(dir: &Path) -> PathBuf {
    let rows: Vec<String> =
        (0..400).map(|i| format!("{:x}row{}-{}{}", i * 37 % 251, i % 13, ["data", "base", "query", "index"][i % 4], i)).collect();
    let p = dir.join("d.txt");
    fs::write(&p, rows.join("\n")).unwrap();
    p
}

fn build(dir: &Path, kind: &str, extra: &[&str]) -> PathBuf {
    let data = dataset(dir);
    let out = dir.join(format!("{kind}.lrnt"));
    let mut args = vec!["build", "--data", data.to_str().unwrap(), "--pattern", kind, "--eb", "1.5", "--max-len", "6"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--seed", "7", "-o", out.to_str().unwrap()]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn build_and_estimate() {
    let dir = TempDir::new().unwrap();
    let model = build(dir.path(), "substring", &["--explain"]);
    let m = model.to_str().unwrap();

    let o = run(&["estimate", "-m", m, "%data%"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    // 100 rows contain "data"
    assert!((100.0 / 1.5..=150.0).contains(&v), "{v}");
    assert_eq!(stdout(&o).trim().split('.').nth(1).map(str::len), Some(2));

    let o = run(&["estimate", "-m", m, "%data%", "--round"]);
    let r: u64 = stdout(&o).trim().parse().unwrap();
    assert_eq!(r, (v + 0.5).floor() as u64);
}

#[test]
fn explain_prints_plan() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("m.lrnt");
    let o = run(&[
        "build", "--data", data.to_str().unwrap(), "--pattern", "prefix", "--eb", "1.5", "--max-len", "6", "--explain",
        "--seed", "1", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("tree threshold"));
    assert!(stdout(&o).contains("predicted bits"));
}

#[test]
fn bad_eb_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let o = run(&["build", "--data", data.to_str().unwrap(), "--pattern", "prefix", "--eb", "1.0", "--seed", "1", "-o", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--eb"));
}

#[test]
fn infeasible_target_reported() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("m.lrnt");
    let o = run(&[
        "build", "--data", data.to_str().unwrap(), "--pattern", "substring", "--eb", "1.01", "--max-len", "4", "--pn",
        "0.9999999999", "--seed", "1", "-o", out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("infeasible constraint"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn malformed_and_mismatched_queries() {
    let dir = TempDir::new().unwrap();
    let model = build(dir.path(), "substring", &[]);
    let m = model.to_str().unwrap();
    let o = run(&["estimate", "-m", m, "a%b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed pattern"));

    let o = run(&["estimate", "-m", m, "row%"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("substring") && err.contains("prefix"), "{err}");
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let gen = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "gen", "--data", data.to_str().unwrap(), "--pattern", "prefix", "--max-len", "6", "--pos", "300", "--neg",
            "300", "--seed", "1", "-o", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let a = gen("a.tsv");
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 600);
    assert_eq!(a, gen("b.tsv"));
}

#[test]
fn gen_exhaustion_surfaces() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("tiny.txt");
    fs::write(&data, "aaaa\naaa").unwrap();
    let o = run(&[
        "gen", "--data", data.to_str().unwrap(), "--pattern", "substring", "--max-len", "4", "--pos", "1", "--neg", "5",
        "--max-extra", "1", "--seed", "1", "-o", dir.path().join("w.tsv").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("could not generate"), "{}", stderr(&o));
}

fn gen_workload(dir: &Path, kind: &str, pos: &str, neg: &str) -> PathBuf {
    let data = dir.join("d.txt");
    let out = dir.join(format!("w-{pos}-{neg}.tsv"));
    let o = run(&[
        "gen", "--data", data.to_str().unwrap(), "--pattern", kind, "--max-len", "6", "--pos", pos, "--neg", neg,
        "--seed", "3", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn eval_catalog_workload_within_bound() {
    let dir = TempDir::new().unwrap();
    let model = build(dir.path(), "suffix", &[]);
    let w = gen_workload(dir.path(), "suffix", "400", "0");
    let o = run(&["eval", "-m", model.to_str().unwrap(), "-w", w.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["quantiles"]["p100"].as_f64().unwrap() <= 1.5);
    assert!(v["empty_identification_rate"].is_null());
    for key in ["mean_q_error", "by_cardinality", "by_length", "model_size_bytes", "mean_latency_us", "build_seconds"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let a = run(&["eval", "-m", model.to_str().unwrap(), "-w", w.to_str().unwrap()]);
    assert!(stdout(&a).contains("mean q-error"));
}

#[test]
fn eval_empty_only_workload() {
    let dir = TempDir::new().unwrap();
    let model = build(dir.path(), "substring", &[]);
    let w = gen_workload(dir.path(), "substring", "0", "200");
    let o = run(&["eval", "-m", model.to_str().unwrap(), "-w", w.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mean q-error:        n/a"), "{text}");
    let o = run(&["eval", "-m", model.to_str().unwrap(), "-w", w.to_str().unwrap(), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rate = v["empty_identification_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(v["mean_q_error"].is_null());
}

#[test]
fn eval_empty_file_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let model = build(dir.path(), "substring", &[]);
    let w = dir.path().join("empty.tsv");
    fs::write(&w, "").unwrap();
    let o = run(&["eval", "-m", model.to_str().unwrap(), "-w", w.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_kind_mismatch() {
    let dir = TempDir::new().unwrap();
    let model = build(dir.path(), "substring", &[]);
    let w = gen_workload(dir.path(), "prefix", "10", "0");
    let o = run(&["eval", "-m", model.to_str().unwrap(), "-w", w.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("mismatch"));
}

#[test]
fn long_queries_need_flag() {
    let dir = TempDir::new().unwrap();
    let plain = build(dir.path(), "prefix", &[]);
    let o = run(&["estimate", "-m", plain.to_str().unwrap(), "row1-data1%"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("long-query"));

    let dir2 = TempDir::new().unwrap();
    let long = build(dir2.path(), "prefix", &["--long-queries"]);
    let o = run(&["estimate", "-m", long.to_str().unwrap(), "row1-data1%"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v >= 1.0);
}

#[test]
fn corrupt_model_rejected() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("junk.lrnt");
    fs::write(&p, b"definitely not a model").unwrap();
    let o = run(&["estimate", "-m", p.to_str().unwrap(), "%a%"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("not a model file"));
}
