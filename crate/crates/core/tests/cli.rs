use std::fs;
use std::process::Command;

use serde_json::Value;

const TINY: &[&str] = &[
    "--set", "eval.frames=4",
    "--set", "link.l1_km=100",
    "--set", "sweep.powers_dbm=0",
    "--set", "tx.symbols_per_frame=64",
];

fn zdiv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_zdiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn body(csv: &str) -> String {
    // drop the preamble line; it carries only the seed and digest
    csv.lines().skip(1).collect::<Vec<_>>().join("\n")
}

#[test]
fn baselines_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "2")] {
        let mut args = vec!["baselines", "--out", dir.path().to_str().unwrap(), "--workers", workers];
        args.extend_from_slice(TINY);
        let out = zdiv(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["scenario"], "baseline-curves");
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    }
    let ca = fs::read(a.path().join("baseline-curves.csv")).unwrap();
    let cb = fs::read(b.path().join("baseline-curves.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("# scenario=baseline-curves preset=desk seed="));
    assert!(body(&text).starts_with("scenario,mode,power_dbm,l2_km,seed,mi_bits,eta,ci_low,ci_high,wall_s"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(a.path().join("baseline-curves.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["wall_s"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_changes_results_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for seed in ["1", "2"] {
        let mut args = vec!["baselines", "--out", dir.path().to_str().unwrap(), "--seed", seed];
        args.extend_from_slice(TINY);
        let out = zdiv(&args);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        hashes.push((v["config_hash"].as_str().unwrap().to_owned(), v["rows"][0]["mi_bits"].as_f64().unwrap()));
    }
    assert_ne!(hashes[0].0, hashes[1].0);
    assert_ne!(hashes[0].1, hashes[1].1);
}

#[test]
fn single_point_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = zdiv(&[
        "sweep-l2", "--kind", "soliton", "--out", dir.path().to_str().unwrap(),
        "--set", "soliton.l2_km=0",
        "--set", "soliton.frames=16",
        "--set", "soliton.slots=16",
        "--set", "soliton.l1_km=50",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("soliton-l2-sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn config_prints_resolved_text() {
    let out = zdiv(&["config", "--set", "tx.order=64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "tx.order = 64"));
}

#[test]
fn config_file_layers_under_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "# my run\ntx.order = 64\nseed = 5\n").unwrap();
    let out = zdiv(&["config", "--config", path.to_str().unwrap(), "--set", "seed=9"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "tx.order = 64"));
    assert!(text.lines().any(|l| l == "seed = 9"));
}

#[test]
fn errors_are_json_with_exit_codes() {
    let out = zdiv(&["config", "--set", "no.such=1"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "config");

    let out = zdiv(&["--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "usage");

    let out = zdiv(&["config", "--preset", "huge"]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(zdiv(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_without_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = zdiv(&["eval", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["error"]["message"].as_str().is_some());
}
