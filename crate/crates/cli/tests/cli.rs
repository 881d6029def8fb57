//! Drives the `snaq` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn snaq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snaq")).args(args).output().expect("launch snaq")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn single_plaquette_spectrum() {
    let v = stdout_json(&snaq(&["plaquette-spectrum", "--k", "1", "--g2", "1", "--levels", "2"]));
    assert_eq!(v["schema"], "snaq.plaquette-spectrum/1");
    let e: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 4.0).abs() < 1e-12, "{e:?}");
}

#[test]
fn fsymbol_prints_fifteen_decimals() {
    let out = snaq(&["fsymbol", "--k", "1", "--labels", "0,0,0,0,0,0"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.000000000000000");
}

#[test]
fn exit_codes() {
    assert_eq!(snaq(&["verify", "--k", "2"]).status.code(), Some(0));
    assert_eq!(snaq(&["suite-all", "--k-max", "1", "--corrupt-ftable"]).status.code(), Some(1));
    assert_eq!(snaq(&["fsymbol", "--k", "1", "--labels", "0,0"]).status.code(), Some(2));
    assert_eq!(snaq(&["groundstate", "--k", "0", "--g2", "1"]).status.code(), Some(2));
    assert_eq!(snaq(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(snaq(&["compile", "--k", "1", "--g2", "1", "--tau", "0.1", "--lattice", "3x3"]).status.code(), Some(2));
}

#[test]
fn basis_dimensions() {
    let out = snaq(&["basis-dim", "--topology", "2x2", "--k", "2"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "528");
    let out = snaq(&["basis-dim", "--topology", "hexagon", "--k", "3", "--outer", "0,0,0,0,0,0"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "4");
}

#[test]
fn compiled_circuit_round_trips_through_gate_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("circuits/step.json");
    let p = path.to_str().unwrap();
    let compile = snaq(&["compile", "--k", "2", "--g2", "1.3", "--tau", "0.2", "--steps", "2", "--out", p]);
    assert!(compile.status.success(), "{}", String::from_utf8_lossy(&compile.stderr));
    let first = fs::read(&path).unwrap();

    let v = stdout_json(&snaq(&["gate-count", "--circuit", p]));
    assert_eq!(v["per_step"], 3742);
    assert_eq!(v["bound"], 9508);
    assert_eq!(v["within_bound"], true);
    assert_eq!(v["inventory"]["f"], 12);

    snaq(&["compile", "--k", "2", "--g2", "1.3", "--tau", "0.2", "--steps", "2", "--out", p]);
    assert_eq!(fs::read(&path).unwrap(), first, "compile output is not deterministic");
}

#[test]
fn lowered_circuit_counts_match() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lowered.json");
    let p = p.to_str().unwrap();
    let c = snaq(&["compile", "--k", "1", "--g2", "1", "--tau", "0.1", "--lower-ancilla", "--out", p]);
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert_eq!(stdout_json(&snaq(&["gate-count", "--circuit", p]))["per_step"], 810);
}

#[test]
fn hexagon_verification() {
    let v = stdout_json(&snaq(&["hexagon-verify", "--k", "2", "--tau", "1.0", "--g2", "0.7", "--seed", "5"]));
    assert!(v["max_abs_error"].as_f64().unwrap() < 1e-8, "{v}");
    assert_eq!(v["passed"], true);
}

fn scan(dir: &Path, k: u32) -> std::path::PathBuf {
    let path = dir.join(format!("k{k}.csv"));
    let out = snaq(&["phase-scan", "--k", &k.to_string(), "--points", "40", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn scan_fit_and_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scans: Vec<_> = (1..=4).map(|k| scan(dir.path(), k)).collect();
    assert!(dir.path().join("k1.critical.json").exists());

    let fit = stdout_json(&snaq(&["fit-critical", "--input", dir.path().to_str().unwrap()]));
    assert!(fit["g0"].as_f64().unwrap() > 0.0, "{fit}");

    let reference = dir.path().join("reference.csv");
    fs::write(&reference, "g2,plaquette,error\n1.0,0.5,0.01\n2.0,0.2,0.01\n").unwrap();
    let cmp = dir.path().join("cmp.csv");
    let out = snaq(&[
        "compare-mc",
        "--scan",
        scans[3].to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&cmp).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
}
