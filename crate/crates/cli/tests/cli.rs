use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn tsdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsdm"))
        .args(args)
        .output()
        .expect("spawn tsdm")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// splitmix-ish bytes; no need for real randomness here.
fn noise(seed: u64, len: usize) -> Vec<u8> {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 24) as u8
        })
        .collect()
}

fn write_dir(dir: &TempDir, name: &str, payloads: &[Vec<u8>]) -> PathBuf {
    let d = dir.path().join(name);
    fs::create_dir(&d).unwrap();
    for (i, p) in payloads.iter().enumerate() {
        fs::write(d.join(format!("t{i:02}.bin")), p).unwrap();
    }
    d
}

fn write_json(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn small_generator(count: usize) -> Value {
    json!({
        "grammar": "random-bytes",
        "count": count,
        "seed": 5,
        "length": { "kind": "uniform", "min": 20, "max": 120 },
        "alphabet": "abcdefgh",
        "variety": [2, 8]
    })
}

fn ncd_value(out: &Output) -> f64 {
    assert!(out.status.success(), "{}", stderr(out));
    String::from_utf8_lossy(&out.stdout).trim().parse().unwrap()
}

#[test]
fn ncd_identity_and_unrelated() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    fs::write(&a, noise(1, 1024)).unwrap();
    fs::write(&b, noise(2, 1024)).unwrap();
    assert!(ncd_value(&tsdm(&["ncd", s(&a), s(&a)])) <= 0.1);
    assert!(ncd_value(&tsdm(&["ncd", s(&a), s(&b)])) >= 0.9);
}

#[test]
fn ncd_missing_path_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.bin");
    fs::write(&a, b"hello").unwrap();
    let missing = dir.path().join("nope.bin");
    let out = tsdm(&["ncd", s(&a), s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.bin"), "{}", stderr(&out));
}

#[test]
fn diameter_of_a_pair_is_its_ncd() {
    let dir = TempDir::new().unwrap();
    let d = write_dir(&dir, "pair", &[noise(3, 600), noise(3, 300)]);
    let report = stdout_json(&tsdm(&["diameter", "--dir", s(&d)]));
    let pair = ncd_value(&tsdm(&["ncd", s(&d.join("t00.bin")), s(&d.join("t01.bin"))]));
    assert_eq!(report["diameter"].as_f64().unwrap(), pair);
    assert_eq!(report["pool_size"], 2);
}

#[test]
fn diameter_exact_dominates_chain() {
    let dir = TempDir::new().unwrap();
    let mut payloads: Vec<Vec<u8>> = (0..6).map(|i| noise(10 + i, 100 + 40 * i as usize)).collect();
    payloads.push(payloads[2].clone());
    payloads.push(b"abcabcabcabcabcabcabc".to_vec());
    let d = write_dir(&dir, "eight", &payloads);
    let report = stdout_json(&tsdm(&["diameter", "--dir", s(&d), "--exact"]));
    let approx = report["diameter"].as_f64().unwrap();
    let exact = report["exact"].as_f64().unwrap();
    assert!(approx <= exact, "{approx} > {exact}");
}

#[test]
fn diameter_rejects_small_and_oversize_pools() {
    let dir = TempDir::new().unwrap();
    let one = write_dir(&dir, "one", &[noise(1, 50)]);
    let out = tsdm(&["diameter", "--dir", s(&one)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("pool must contain at least 2 items"));

    let many: Vec<_> = (0..13).map(|i| noise(i, 40)).collect();
    let big = write_dir(&dir, "big", &many);
    let out = tsdm(&["diameter", "--dir", s(&big), "--exact"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("12"), "{}", stderr(&out));
}

#[test]
fn select_tsdm_all_and_random_deterministic() {
    let dir = TempDir::new().unwrap();
    let gen = write_json(&dir, "gen.json", &small_generator(12));
    let all = stdout_json(&tsdm(&["select", "--generate", s(&gen), "--k", "12"]));
    assert_eq!(all["ids"], json!((0..12).collect::<Vec<_>>()));

    let args = [
        "select",
        "--generate",
        s(&gen),
        "--k",
        "4",
        "--method",
        "random",
        "--seed",
        "7",
    ];
    let first = tsdm(&args);
    let second = tsdm(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let ids: Vec<u64> = serde_json::from_value(stdout_json(&first)["ids"].clone()).unwrap();
    assert_eq!(ids.len(), 4);
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn select_greedy_needs_coverage_and_follows_gains() {
    let dir = TempDir::new().unwrap();
    let d = write_dir(&dir, "three", &[noise(1, 64), noise(2, 64), noise(3, 64)]);
    let out = tsdm(&["select", "--dir", s(&d), "--k", "2", "--method", "greedy"]);
    assert_eq!(out.status.code(), Some(2));

    // Disjoint rows of sizes 1, 3 and 5.
    let csv = dir.path().join("cov.csv");
    fs::write(
        &csv,
        "id,u0,u1,u2,u3,u4,u5,u6,u7,u8\n\
         0,0,0,0,0,0,0,0,0,1\n\
         1,0,0,0,0,0,1,1,1,0\n\
         2,1,1,1,1,1,0,0,0,0\n",
    )
    .unwrap();
    let manifest = dir.path().join("picked.jsonl");
    let report = stdout_json(&tsdm(&[
        "select",
        "--dir",
        s(&d),
        "--k",
        "3",
        "--method",
        "greedy",
        "--coverage",
        s(&csv),
        "--out",
        s(&manifest),
    ]));
    assert_eq!(report["ids"], json!([2, 1, 0]));
    let text = fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.lines().count(), 4, "header plus three entries");
}

#[test]
fn select_within_a_length_band_maps_ids_back() {
    let dir = TempDir::new().unwrap();
    let payloads: Vec<_> = [100, 10, 105, 300, 95, 98]
        .iter()
        .map(|&n| noise(n as u64, n))
        .collect();
    let d = write_dir(&dir, "band", &payloads);
    let report = stdout_json(&tsdm(&["select", "--dir", s(&d), "--k", "4", "--target-length", "100"]));
    assert_eq!(report["candidates"], 4);
    assert_eq!(report["ids"], json!([0, 2, 4, 5]));
}

#[test]
fn eval_rejects_malformed_spec_with_location() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("bad.json");
    fs::write(&spec, "{\n  \"seed\": 1,\n  \"bogus\": true\n}\n").unwrap();
    let out = tsdm(&["eval", s(&spec)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
}

#[test]
fn eval_curves_end_at_full_greedy_coverage() {
    let dir = TempDir::new().unwrap();
    let spec = write_json(
        &dir,
        "spec.json",
        &json!({
            "seed": 3,
            "pool": { "generate": small_generator(40) },
            "sut": { "kind": "ngram-coverage", "width": 2, "units": 40, "alphabet": "abcdefgh", "seed": 1 },
            "experiments": [{ "kind": "curves", "random_runs": 4 }]
        }),
    );
    let out_path = dir.path().join("report.json");
    let out = tsdm(&["eval", s(&spec), "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let exp = &report["experiments"][0];
    assert_eq!(exp["status"], "ok");
    let greedy = exp["result"]["comparison"]["greedy"]["points"].as_array().unwrap();
    assert_eq!(greedy.last().unwrap()["normalized"].as_f64(), Some(1.0));
    assert_eq!(report["pool_digest"].as_str().unwrap().len(), 64);
    assert_eq!(report["config"]["seed"], 3);

    let csv = fs::read_to_string(dir.path().join("report.curves.csv")).unwrap();
    assert!(csv.starts_with("experiment,k,method,normalized_coverage"));
}

#[test]
fn eval_runtime_fit_and_partial_failure() {
    let dir = TempDir::new().unwrap();
    let spec = write_json(
        &dir,
        "spec.json",
        &json!({
            "seed": 9,
            "pool": { "generate": small_generator(10) },
            "sut": { "kind": "ngram-coverage", "width": 2, "units": 10, "alphabet": "abcdefgh" },
            "experiments": [
                {
                    "kind": "runtime",
                    "sizes": [50, 100, 200],
                    "generator": {
                        "grammar": "random-bytes", "count": 1, "seed": 3,
                        "length": { "kind": "fixed", "length": 32 }, "alphabet": "abcdefghijklmnop"
                    }
                },
                {
                    "kind": "correlation", "strata": 10, "set_size": 50, "samples": 5,
                    "pool": { "manifest": "missing.jsonl" }
                }
            ]
        }),
    );
    let out = tsdm(&["eval", s(&spec), "--curves", s(&dir.path().join("c.csv"))]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let fit = &report["experiments"][0]["result"]["timing"]["fit"];
    assert!(fit["a"].as_f64().unwrap() > 0.0);
    assert!(fit["r2"].as_f64().is_some());
    assert_eq!(report["experiments"][1]["status"], "failed");
    assert!(report["experiments"][1]["error"]
        .as_str()
        .unwrap()
        .contains("missing.jsonl"));
}

#[test]
fn generate_and_coverage_round_trip() {
    let dir = TempDir::new().unwrap();
    let gen = write_json(&dir, "gen.json", &small_generator(9));
    let manifest = dir.path().join("pool.jsonl");
    let out = tsdm(&["generate", s(&gen), "--out", s(&manifest)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let from_manifest = stdout_json(&tsdm(&["diameter", "--manifest", s(&manifest)]));
    let from_gen = stdout_json(&tsdm(&["diameter", "--generate", s(&gen)]));
    assert_eq!(from_manifest["pool_digest"], from_gen["pool_digest"]);

    let sut = write_json(
        &dir,
        "sut.json",
        &json!({ "kind": "fault-panel", "faults": 6, "alphabet": "abcdefgh", "seed": 2 }),
    );
    let out = tsdm(&["coverage", "--manifest", s(&manifest), "--sut", s(&sut)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 7);
}

#[test]
fn pool_source_is_required_and_exclusive() {
    assert_eq!(tsdm(&["diameter"]).status.code(), Some(2));
    assert_eq!(
        tsdm(&["diameter", "--dir", ".", "--manifest", "x.jsonl"]).status.code(),
        Some(2)
    );
}
