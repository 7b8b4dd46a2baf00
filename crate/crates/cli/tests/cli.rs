use std::path::Path;
use std::process::{Command, Output};

use cr_adjoint::fdcheck::{fd_total_gradient, FdConfig};
use cr_adjoint::problems::{objective, Example1};
use cr_adjoint::wirtinger::TangentSpaceKind;
use num_complex::Complex64;
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cr-adjoint"));
    cmd.env("CR_ADJOINT_LOG", "error");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn matrix(v: &Value, key: &str) -> Vec<Vec<Option<f64>>> {
    v[key]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap().iter().map(Value::as_f64).collect())
        .collect()
}

#[test]
fn gradfield_ex1_full_grid_matches_fd() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex1.json");
    let o = run(&["gradfield", "--problem", "ex1", "--grid", "41", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let v = read_json(&out);
    assert_eq!(v["schema"], "fieldexport/1");
    assert_eq!(v["problem"], "ex1");
    assert_eq!(v["axes"]["x"]["count"], 41);
    let cost = matrix(&v, "cost");
    let gx = matrix(&v, "grad_re");
    let gy = matrix(&v, "grad_im");
    let records: usize = cost.iter().map(|r| r.iter().flatten().count()).sum();
    assert_eq!(records, 1681);
    assert!(v["nulls"].as_array().unwrap().is_empty());

    let value = |k: usize| -0.5 + k as f64 * 0.025;
    for (r, c) in [(0, 0), (3, 17), (7, 40), (12, 5), (20, 20), (25, 33), (31, 9), (36, 28), (40, 0), (40, 40)] {
        let p = [Complex64::new(value(c), 0.0), Complex64::new(value(r), 0.0)];
        let fd = fd_total_gradient(|q| objective(&Example1, q), &p, TangentSpaceKind::RealHilbert, &FdConfig::default())
            .unwrap();
        let g = [gx[r][c].unwrap(), gy[r][c].unwrap()];
        let err = ((g[0] - fd[0]).powi(2) + (g[1] - fd[1]).powi(2)).sqrt() / fd[0].hypot(fd[1]).max(1e-8);
        assert!(err < 1e-5, "({r},{c}): {err}");
        assert!((cost[r][c].unwrap() - objective(&Example1, &p).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn gradfield_ex2_is_finite_at_origin_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&["gradfield", "--problem", "ex2", "--grid", "21", "--range", "-0.5,0.5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    assert_eq!(matrix(&v, "cost")[10][10], Some(0.5));
    assert!(matrix(&v, "grad_re")[10][10].unwrap().is_finite());
}

#[test]
fn unwritable_output_exits_2() {
    let o = run(&["gradfield", "--problem", "ex1", "--grid", "3", "--out", "/nonexistent-dir/field.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["inverse", "--n", "16", "--truth-n", "32", "--out", "/nonexistent-dir/inv.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_passes_for_every_problem() {
    for problem in ["ex1", "ex2", "helmholtz"] {
        let o = run(&["check", "--problem", problem, "--samples", "20", "--seed", "7", "--n", "120"]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(o.status.success(), "{problem}: {stdout}");
        let json_start = stdout.find('{').unwrap();
        let v: Value = serde_json::from_str(&stdout[json_start..]).unwrap();
        assert_eq!(v["passed"], true);
        assert_eq!(v["samples"], 20);
    }
}

#[test]
fn check_rejects_zero_samples() {
    let o = run(&["check", "--problem", "ex1", "--samples", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inverse_defaults_reproduce_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inverse.json");
    let o = run(&["inverse", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["schema"], "inverse/1");
    assert_eq!(v["truth_p"]["re"], 0.5);
    let rows = v["rows"].as_array().unwrap();
    let row = |m: &str| rows.iter().find(|r| r["method"] == m).unwrap();
    let (adj, fd) = (row("adjoint"), row("fd"));
    let p = Complex64::new(adj["final_p"]["re"].as_f64().unwrap(), adj["final_p"]["im"].as_f64().unwrap());
    assert!((p - Complex64::new(0.5, 0.5)).norm() <= 1e-3);
    assert!(adj["n_cost_evals"].as_u64().unwrap() < fd["n_cost_evals"].as_u64().unwrap());
    for r in rows {
        assert!(r["final_cost"].as_f64().unwrap() <= 1e-6);
    }
}

#[test]
fn inverse_single_method_and_bad_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inverse.json");
    let o = run(&["inverse", "--method", "adjoint", "--n", "60", "--truth-n", "400", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(read_json(&out)["rows"].as_array().unwrap().len(), 1);

    let rejected = dir.path().join("rejected.json");
    let o = run(&["inverse", "--n", "120", "--truth-n", "120", "--out", rejected.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!rejected.exists());
    let o = run(&["inverse", "--method", "ga", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn inverse_failing_method_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inverse.json");
    // A four-point grid cannot fit endpoint data generated far from the origin.
    let o = run(&[
        "inverse", "--method", "adjoint", "--n", "4", "--truth-n", "1000", "--p-true", "3+3i", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v = read_json(&out);
    assert!(v["rows"][0]["final_cost"].as_f64().unwrap() > 1e-6);
}
