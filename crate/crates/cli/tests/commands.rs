use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn tiny_config() -> Value {
    json!({
        "training": {
            "model": "linear-elastic-plane-stress",
            "geometry": { "edge_length": 100.0, "hole_radius": 10.0, "left_traction": [-100.0, 0.0] },
            "kappa_box": { "lower": { "k": 100000.0, "g": 60000.0 }, "upper": { "k": 200000.0, "g": 100000.0 } },
            "counts": { "n_kappa_pde": 4, "n_pde": 8, "n_bc": 4, "n_kappa_data": 2, "n_data": 16 },
            "hidden": [6, 6],
            "optimizer": { "max_iterations": 5 },
            "mesh_size": 8.0
        },
        "validation": { "n_kappa": 2, "n_points": 32 },
        "calibration": {
            "n_sensors": 32,
            "mcmc": { "n_walkers": 10, "n_steps": 12, "n_burnin": 4, "stretch": 4.0, "seed": 0 },
            "coverage_tests": 2
        },
        "ablation": { "n_pde": 16, "n_bc": 4, "n_validation": 32, "optimizer": { "max_iterations": 3 } }
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.in.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastocal")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_data_writes_csv_and_creates_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let out = tmp.path().join("nested/data");
    ok(&["generate-data", "--config", s(&cfg), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("snapshot_000.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,ux,uy");
    assert_eq!(text.lines().count(), 17);
    assert!(out.join("solution_001.csv").exists());
    assert!(out.join("mesh.txt").exists());
    let resolved: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["training"]["counts"]["n_data"], 16);
    assert_eq!(resolved["calibration"]["level"], 0.95);
}

#[test]
fn generate_data_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["generate-data", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["generate-data", "--config", s(&cfg), "--out", s(&b)]);
    for f in ["snapshot_000.csv", "solution_000.csv", "kappas.csv", "mesh.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn hyperelastic_data_is_an_oracle_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config();
    cfg["training"]["model"] = json!("neo-hookean-plane-strain");
    cfg["training"]["geometry"]["hole_radius"] = json!(0.0);
    cfg["training"]["counts"] = json!({ "n_kappa_pde": 4, "n_pde": 8, "n_bc": 4, "n_kappa_data": 0, "n_data": 0 });
    cfg["training"]["weights"] = json!({ "pde": 1.0, "neumann": 1.0, "data": 0.0 });
    let path = write_config(tmp.path(), &cfg);
    ok(&["generate-data", "--config", s(&path), "--out", s(tmp.path())]);
    let text = fs::read_to_string(tmp.path().join("homogeneous_oracle.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,g,traction,lambda1,lambda2");
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[3] > 1.0 && row[4] < 1.0);
}

#[test]
fn train_validate_and_calibrate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let train_dir = tmp.path().join("train");
    ok(&["train", "--config", s(&cfg), "--out", s(&train_dir)]);
    let ck = train_dir.join("checkpoint.json");
    let history = fs::read_to_string(train_dir.join("loss_history.csv")).unwrap();
    assert!(history.starts_with("iteration,evaluations,total,pde,neumann,data,gradient_norm"));
    let totals: Vec<f64> = history.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(totals.windows(2).all(|w| w[1] <= w[0]));
    let report: Value = serde_json::from_str(&fs::read_to_string(train_dir.join("train_report.json")).unwrap()).unwrap();
    assert!(report["final_total"].as_f64().unwrap().is_finite());

    let resumed = tmp.path().join("resumed");
    ok(&["train", "--config", s(&cfg), "--out", s(&resumed), "--checkpoint", s(&ck)]);
    let first: f64 = fs::read_to_string(resumed.join("loss_history.csv")).unwrap().lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((first - totals.last().unwrap()).abs() <= 1e-12 * first.abs());

    let val = tmp.path().join("val");
    ok(&["validate", "--config", s(&cfg), "--checkpoint", s(&ck), "--out", s(&val)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(val.join("validation.json")).unwrap()).unwrap();
    assert!(v["rl2"].as_f64().unwrap() > 0.0);

    let meas = tmp.path().join("meas");
    ok(&["synthesize", "--config", s(&cfg), "--kappa", "150000,80000", "--out", s(&meas)]);
    let data = meas.join("measurement.csv");

    let nls = tmp.path().join("nls");
    ok(&["calibrate-nls", "--config", s(&cfg), "--checkpoint", s(&ck), "--data", s(&data), "--out", s(&nls)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(nls.join("nls_report.json")).unwrap()).unwrap();
    let k = r["kappa"]["k"].as_f64().unwrap();
    assert!((100000.0..=200000.0).contains(&k));
    assert!(r["evaluations"].as_u64().unwrap() >= 1);

    let mcmc = tmp.path().join("mcmc");
    ok(&["calibrate-mcmc", "--config", s(&cfg), "--checkpoint", s(&ck), "--data", s(&data), "--out", s(&mcmc)]);
    let post = fs::read_to_string(mcmc.join("posterior.csv")).unwrap();
    assert_eq!(post.lines().next().unwrap(), "walker,step,K,G,logp");
    assert_eq!(post.lines().count(), 1 + 10 * 12);
    let hist = fs::read_to_string(mcmc.join("histogram_G.csv")).unwrap();
    let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 120);
    assert!(mcmc.join("mcmc_report.json").exists() && mcmc.join("config.json").exists());

    let cov = tmp.path().join("cov");
    ok(&["coverage", "--config", s(&cfg), "--checkpoint", s(&ck), "--out", s(&cov)]);
    let c: Value = serde_json::from_str(&fs::read_to_string(cov.join("coverage.json")).unwrap()).unwrap();
    assert_eq!(c["n_tests"], 2);
}

#[test]
fn mismatched_checkpoint_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let a = tmp.path().join("a");
    ok(&["train", "--config", s(&cfg), "--out", s(&a)]);
    let mut other = tiny_config();
    other["training"]["hidden"] = json!([5]);
    let other = write_config(&tmp.path().join("a"), &other);
    let out = run(&["train", "--config", s(&other), "--out", s(&tmp.path().join("b")), "--checkpoint", s(&a.join("checkpoint.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bc_ablation_reports_both_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    ok(&["bc-ablation", "--config", s(&cfg), "--out", s(tmp.path()), "--seed", "3"]);
    let r: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ablation.json")).unwrap()).unwrap();
    assert!(r["with_symmetry"]["rl2"].as_f64().unwrap() > 0.0);
    assert!(r["without_symmetry"]["rl2"].as_f64().unwrap() > 0.0);
    let resolved: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["training"]["seed"], 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = tiny_config();
    bad["training"]["unexpected"] = json!(1);
    let path = write_config(tmp.path(), &bad);
    assert_eq!(run(&["generate-data", "--config", s(&path), "--out", s(tmp.path())]).status.code(), Some(2));

    let mut invalid = tiny_config();
    invalid["calibration"]["level"] = json!(1.5);
    let path = write_config(tmp.path(), &invalid);
    assert_eq!(run(&["generate-data", "--config", s(&path), "--out", s(tmp.path())]).status.code(), Some(2));

    let missing = tmp.path().join("missing.json");
    assert_eq!(run(&["generate-data", "--config", s(&missing), "--out", s(tmp.path())]).status.code(), Some(4));

    let cfg = write_config(tmp.path(), &tiny_config());
    let no_ck = tmp.path().join("none.json");
    let data = tmp.path().join("none.csv");
    let code = run(&["calibrate-nls", "--config", s(&cfg), "--checkpoint", s(&no_ck), "--data", s(&data), "--out", s(tmp.path())]).status.code();
    assert_eq!(code, Some(4));
}
