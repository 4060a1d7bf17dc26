use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ocp_afem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocp-afem"))
        .args(args)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ocp_afem(&args)
}

#[test]
fn lshape_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--example", "1", "--nu", "1e-3", "--max-iters", "3", "--seed", "7"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for it in 1..=3 {
        let vtk = fs::read_to_string(dir.path().join(format!("mesh_{it}.vtk"))).unwrap();
        assert!(vtk.starts_with("# vtk DataFile"));
    }
    let csv = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("iter,ndof,est_st"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 3);
    assert_eq!(summary["seed"], 7);
    assert!(summary["final_effectivity"].as_f64().unwrap() > 0.0);
    assert!(summary["slopes"]["err_y_h1"].is_null());
    assert_eq!(summary["newton_iterations"].as_array().unwrap().len(), 3);
}

#[test]
fn cube_run_has_no_error_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "--example",
            "2",
            "--nonlinearity",
            "a2",
            "--max-iters",
            "2",
            "--initial-level",
            "0",
            "--quad-assembly",
            "6",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.contains(",,"), "{row}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["final_effectivity"].is_null());
}

#[test]
fn uniform_cold_competitor_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "--example",
            "1",
            "--estimator",
            "competitor",
            "--refinement",
            "uniform",
            "--cold-start",
            "--max-iters",
            "3",
            "--initial-level",
            "0",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["refinement"], "uniform");
    assert_eq!(summary["estimator"], "competitor");
    assert!(summary["slopes"]["err_total"].is_null() || summary["slopes"]["err_total"].is_number());
}

#[test]
fn invalid_arguments_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [
        &["--example", "3"][..],
        &["--example", "1", "--nonlinearity", "a1"],
        &["--example", "2", "--nonlinearity", "arctan"],
        &["--example", "1", "--nu", "-1"],
        &["--example", "1", "--max-iters", "0"],
    ] {
        let out = run_in(dir.path(), extra);
        assert_eq!(
            out.status.code(),
            Some(1),
            "{extra:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(ocp_afem(&["--help"]).status.code(), Some(0));
}
