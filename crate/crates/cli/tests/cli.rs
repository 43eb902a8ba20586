use std::path::Path;
use std::process::{Command, Output};

fn dualmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualmatch")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, name: &str, shape: &str, rotate_z: &str) {
    let stem = dir.join(name);
    let out = dualmatch(&["make-fixture", shape, "--out", arg(&stem), "--rotate-z", rotate_z]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn match_export_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, "a", "tetra", "0");
    fixture(d, "b", "tetra", "-0.3");
    let (a, b) = (d.join("a.off"), d.join("b.off"));
    let (fa, fb) = (d.join("a.dmf"), d.join("b.dmf"));
    let sol = d.join("match.json");
    let log = d.join("log.csv");
    let out = dualmatch(&[
        "match", arg(&a), arg(&b), "--features-a", arg(&fa), "--features-b", arg(&fb),
        "--out", arg(&sol), "--log", arg(&log),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(json["certified"], true);
    assert_eq!(json["num_product_triangles"], 368);
    assert!(std::fs::read_to_string(&log).unwrap().starts_with("time_s,iteration,kind"));

    let lp = d.join("tetra.lp");
    let out = dualmatch(&["export-lp", arg(&a), arg(&b), "--features-a", arg(&fa), "--features-b", arg(&fb), "--out", arg(&lp)]);
    assert!(out.status.success());
    let out = dualmatch(&["verify", arg(&lp), arg(&sol)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // the LP solved directly agrees with the exact oracle
    let ilp = d.join("ilp.json");
    let exact = d.join("exact.json");
    assert_eq!(dualmatch(&["solve-ilp", arg(&lp), "--out", arg(&ilp)]).status.code(), Some(0));
    assert_eq!(dualmatch(&["oracle", arg(&lp), "--out", arg(&exact)]).status.code(), Some(0));
    let read = |p: &Path| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    let (x, y) = (read(&ilp), read(&exact));
    let diff = x["objective"].as_f64().unwrap() - y["objective"].as_f64().unwrap();
    assert!(diff.abs() < 1e-6);
    assert_eq!(dualmatch(&["verify", arg(&lp), arg(&exact)]).status.code(), Some(0));
}

#[test]
fn verify_rejects_a_broken_solution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, "a", "tetra", "0");
    let a = d.join("a.off");
    let lp = d.join("t.lp");
    assert!(dualmatch(&["export-lp", arg(&a), arg(&a), "--out", arg(&lp)]).status.success());
    let sol = d.join("bad.json");
    std::fs::write(
        &sol,
        r#"{"feasible":true,"objective":0.0,"best_dual":0.0,"gap":0.0,"certified":true,"num_vars":368,"ones":[0]}"#,
    )
    .unwrap();
    let out = dualmatch(&["verify", arg(&lp), arg(&sol)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("violated"));
}

#[test]
fn input_errors_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, "s", "icosa", "0");
    fixture(d, "t", "torus:6:4", "0");
    let out = dualmatch(&["match", arg(&d.join("s.off")), arg(&d.join("t.off")), "--out", arg(&d.join("x.json"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let missing = dualmatch(&["solve-ilp", arg(&d.join("nope.lp")), "--out", arg(&d.join("y.json"))]);
    assert_eq!(missing.status.code(), Some(4));
    assert_eq!(dualmatch(&["solve-ilp"]).status.code(), Some(4));
    assert_eq!(dualmatch(&["make-fixture", "dodeca", "--out", arg(&d.join("z"))]).status.code(), Some(4));
}

#[test]
fn coarse_to_fine_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = dualmatch(&["make-hierarchy", "--out", arg(d), "--levels", "2", "--rotate", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = d.join("c2f.json");
    let report = d.join("report.json");
    let out = dualmatch(&["c2f", arg(&d.join("hierarchy.txt")), "--out", arg(&sol), "--report", arg(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let levels: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(levels.as_array().map(Vec::len), Some(2));
}
