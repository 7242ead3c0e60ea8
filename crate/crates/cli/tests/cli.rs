use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::io::Write;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_geoprefer");
const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/objects200.jsonl");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/query_uniform.jsonl");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("GEOPREFER_SEED")
        .env_remove("GEOPREFER_K")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn build_index(dir: &Path) -> PathBuf {
    let idx = dir.join("fixture.idx");
    ok(&["index", "build", "--data", FIXTURE, "--out", idx.to_str().unwrap()]);
    idx
}

fn query_args(idx: &Path) -> Vec<String> {
    [
        "query", "--index", idx.to_str().unwrap(), "--lat", "40.75", "--lon", "-73.95",
        "--words", "0,1,2,3,5,8,13,21", "--simulate-p", "uniform",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn query_matches_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let args = query_args(&idx);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = ok(&args);
    assert_eq!(out, std::fs::read_to_string(GOLDEN).unwrap());
}

#[test]
fn query_output_shape_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let args = query_args(&idx);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let rows = lines(&ok(&args));
    let header = &rows[0]["query"];
    assert_eq!(header["k"], 20);
    assert_eq!(header["theta"], 8);
    assert_eq!(header["t"], 8);
    let rounds = &rows[1..rows.len() - 1];
    assert!(rounds.len() <= 10);
    for (i, r) in rounds.iter().enumerate() {
        assert_eq!(r["round"], i + 1);
        let shown: Vec<u64> = r["shown"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        assert!(shown.len() <= 8);
        assert!(shown.contains(&r["chosen"].as_u64().unwrap()));
    }
    let done = rows.last().unwrap();
    assert_eq!(done["done"], true);
    assert_eq!(done["rounds_used"], rounds.len());
    assert_eq!(done["results"].as_array().unwrap().len(), 20);
    assert!((0.0..=1.0).contains(&done["precision"].as_f64().unwrap()));
}

#[test]
fn query_reads_picks_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let mut child = Command::new(BIN)
        .args([
            "query", "--index", idx.to_str().unwrap(), "--lat", "40.75", "--lon", "-73.95",
            "--words", "0,1,2", "--k", "5",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // the first shown set is not known in advance, so stop right away
    child.stdin.take().unwrap().write_all(b"stop\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0]["query"]["k"], 5);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1]["round"], 1);
    assert_eq!(rows[2]["rounds_used"], 0);
    assert_eq!(rows[2]["termination"][0], "UserStop");
    assert_eq!(rows[2]["results"].as_array().unwrap().len(), 5);
}

#[test]
fn eval_is_deterministic_and_has_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let args = [
        "eval", "--index", idx.to_str().unwrap(), "--sessions", "6", "--t", "8",
        "--strategy", "densest,random", "--seed", "3",
    ];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let rows: Vec<&str> = a.lines().collect();
    assert_eq!(rows[0], "strategy,k,theta,t,precision,recall,f1,mean_ms_per_round,mean_rounds");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("densest,20,8,8,"));
    assert!(rows[2].starts_with("random,20,8,8,"));
    assert_eq!(rows[1].split(',').nth(7), Some("NA"));

    let timed = ok(&[args.as_slice(), &["--timing"]].concat());
    let ms: f64 = timed.lines().nth(1).unwrap().split(',').nth(7).unwrap().parse().unwrap();
    assert!(ms >= 0.0);
}

#[test]
fn gen_is_deterministic() {
    let a = ok(&["gen", "--n", "50", "--vocab", "100", "--mean-words", "10", "--seed", "9", "--out", "-"]);
    let b = ok(&["gen", "--n", "50", "--vocab", "100", "--mean-words", "10", "--seed", "9", "--out", "-"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 50);
    let c = ok(&["gen", "--n", "50", "--vocab", "100", "--mean-words", "10", "--seed", "10", "--out", "-"]);
    assert_ne!(a, c);
}

#[test]
fn env_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let out = Command::new(BIN)
        .args(["query", "--lat", "40.75", "--lon", "-73.95", "--words", "1,2", "--simulate-p", "uniform"])
        .env("GEOPREFER_INDEX", &idx)
        .env("GEOPREFER_K", "3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0]["query"]["k"], 3);
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.idx");
    let out = run(&["eval", "--index", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(!err.contains("panicked"));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":1,\"lat\":0,\"lon\":0,\"words\":[1]}\n{oops}\n").unwrap();
    let out = run(&["index", "build", "--data", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let idx = build_index(dir.path());
    let out = run(&["query", "--index", idx.to_str().unwrap(), "--lat", "99", "--lon", "0", "--words", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
