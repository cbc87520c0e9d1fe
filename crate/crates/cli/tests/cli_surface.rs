//! End-to-end checks of the `covdet` binary: artifact layout, snapshot
//! round trip, and exit codes.

use std::path::Path;
use std::process::Command;

fn covdet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covdet"))
}

#[test]
fn simulate_writes_a_loadable_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let status = covdet()
        .args(["--out-dir"])
        .arg(dir.path())
        .args(["--seed", "11", "simulate"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("run.toml").exists());
    let snap = dir.path().join("instance");
    for f in ["meta.toml", "S.csv", "G.csv", "a_true.csv", "positions.csv"] {
        assert!(snap.join(f).exists(), "{f} missing");
    }
    let inst = covdet_core::system_model::snapshot::import(&snap).unwrap();
    assert_eq!(inst.cells(), 3);
    assert_eq!(inst.total_devices(), 120);
    assert_eq!(inst.seed, 11);
}

#[test]
fn mc_emits_all_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
        [instance]
        cells = 1
        n = [10]
        k = [2]
        l = 6

        [run]
        m = 32
        trials = 2
        solvers = ["asicd"]
    "#;
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.path().join("results");
    let status = covdet()
        .args(["--config"])
        .arg(&cfg_path)
        .args(["--out-dir"])
        .arg(&out)
        .arg("mc")
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["run.toml", "trials.csv", "trial_curves.csv", "pmpf.csv", "summary.csv", "timings.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn bad_config_exits_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, "[instance]\ncells = 0\nn = [1]\nk = [1]\nl = 8\n").unwrap();
    let status = covdet()
        .args(["--config"])
        .arg(&cfg_path)
        .arg("mc")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let status = covdet().args(["--preset", "nonexistent", "mc"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn detect_trace_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let status = covdet()
        .args(["--out-dir"])
        .arg(dir.path())
        .args(["--seed", "5", "detect", "--solver", "asicd", "--m", "64"])
        .status()
        .unwrap();
    assert!(status.success());
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep,objective,v_inf,active_set_size,cumulative_updates,elapsed_s"
    );
    // Objective column non-increasing across iterations.
    let objs: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!objs.is_empty());
    for w in objs.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
    }
    assert!(Path::new(&dir.path().join("solution.csv")).exists());
}
