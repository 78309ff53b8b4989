use std::path::Path;
use std::process::{Command, Output};

fn ltm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltm")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn mpc_report_matches_reference_total() {
    let out = ltm(&["mpc-demo", "--report-only", "--n", "500000", "--d", "10", "--s", "1", "--m", "100", "--servers", "3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["total_mb"], "120.024");
}

#[test]
fn mpc_demo_stays_within_quantization_bound() {
    let out = ltm(&["mpc-demo", "--n", "5000", "--d", "4", "--m", "20", "--servers", "2", "--noise", "per-entry"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["max_abs_diff"].as_f64().unwrap() <= v["quantization_bound"].as_f64().unwrap());
}

#[test]
fn noiseless_lowrank_recovers_the_optimum() {
    let out = ltm(&["lowrank", "--n", "20000", "--d", "8", "--k", "2", "--m", "20", "--noise", "none"]);
    assert!(out.status.success());
    assert!(json(&out)["psi"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn threshold_regime_exits_with_code_3() {
    let out = ltm(&["lowrank", "--n", "2000", "--d", "8", "--m", "50", "--noise", "formal"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[threshold-regime]:") && err.lines().count() == 1, "{err}");
}

#[test]
fn bad_flag_value_is_a_config_error() {
    let out = ltm(&["sketch", "--m", "not-a-number"]);
    assert_eq!(out.status.code(), Some(2));
}

fn run_sweep(dir: &Path, cfg: &Path) -> Vec<u8> {
    let out = ltm(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(dir.join("results.csv")).unwrap()
}

#[test]
fn sweep_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"sweep": {"task": {"kind": "lowrank", "d": 6, "k": 2},
                      "mechanisms": ["central", "ltm-gaussian", "local"],
                      "p_values": [1.0], "epsilons": [1.0], "n_grid": [500, 2000],
                      "runs": 4, "m": 10, "seed": 99}}"#,
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = run_sweep(&a, &cfg);
    assert_eq!(first, run_sweep(&b, &cfg));
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 1 + 3 * 2);
    assert!(a.join("manifest.json").exists());
}

#[test]
fn out_dir_gets_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ltm(&["sketch", "--n", "1000", "--m", "10", "--s", "2", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["m"], 10);
    assert!(tmp.path().join("sketch.json").exists());
}
