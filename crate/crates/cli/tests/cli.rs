use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use klspec::composite::{ClassicalField, Lattice};

fn klspec(args: &[&str], input: &Path, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_klspec"));
    cmd.args(&args[..1]).arg("--input").arg(input);
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.args(&args[1..]).output().expect("spawn klspec")
}

fn scenario(dir: &Path, kind: &str, inputs: Value) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    let doc = json!({"schema": "klspec/scenario/v1", "kind": kind, "inputs": inputs});
    fs::write(&path, doc.to_string()).unwrap();
    path
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn free_scalar(mass2: f64) -> Value {
    json!({"schema": "klspec/measure/v1", "channel": "scalar", "atoms": [[mass2, 1.0]],
           "density": {"family": "zero"}, "cutoff": null, "witness": [1.0, 0.0]})
}

#[test]
fn decompose_free_scalar_gives_unit_z() {
    let dir = TempDir::new().unwrap();
    let input = scenario(dir.path(), "decompose", json!({"measure": free_scalar(1.0), "targetMass2": 1.0}));
    let out = dir.path().join("out");
    let o = klspec(&["decompose"], &input, Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["result"]["z"], json!(1.0));
    let csv = fs::read_to_string(out.join("decompose.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("role,mass2,weight"));
    assert_eq!(csv.lines().nth(1), Some("extracted,1e0,1e0"));
}

#[test]
fn scaling_sweep_free_massive_atom() {
    let dir = TempDir::new().unwrap();
    let input = scenario(dir.path(), "scalingSweep", json!({"measure": free_scalar(1.0)}));
    let out = dir.path().join("out");
    let o = klspec(&["scaling-sweep"], &input, Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sd = summary(&out)["result"]["sdEstimate"].as_f64().unwrap();
    assert!((sd - 2.0).abs() <= 0.1, "{sd}");
    let rows = fs::read_to_string(out.join("scalingSweep.csv")).unwrap().lines().count();
    assert_eq!(rows, 9);
}

#[test]
fn camel_case_alias_is_accepted() {
    let dir = TempDir::new().unwrap();
    let input = scenario(dir.path(), "totalMass", json!({"measure": free_scalar(1.0), "upTo": [0.5, 2.0]}));
    let out = dir.path().join("out");
    let o = klspec(&["totalMass"], &input, Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&out)["result"]["totalMass"], json!(1.0));
}

#[test]
fn malformed_measure_names_invariant() {
    let dir = TempDir::new().unwrap();
    let mut m = free_scalar(1.0);
    m["atoms"] = json!([[1.0, -0.5]]);
    let input = scenario(dir.path(), "decompose", json!({"measure": m, "targetMass2": 1.0}));
    let out = dir.path().join("out");
    let o = klspec(&["decompose"], &input, Some(&out));
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("weight must be finite and >= 0"), "{err}");
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["class"], "validation");
    assert!(!out.join("decompose.csv").exists());
}

#[test]
fn zero_z_is_refused() {
    let dir = TempDir::new().unwrap();
    let wave = serde_json::to_value(ClassicalField::plane_wave_on_shell(1.0, [0.5, 0.0, 0.0], 1.0)).unwrap();
    let input = scenario(
        dir.path(),
        "prop61",
        json!({"model": {"mC": 1.0, "m": 0.5, "zC": 0.0, "f": {"family": "identity"}}, "c": wave, "a": wave,
               "lattice": {"t0": 0.0, "x0": 0.0, "dt": 0.2, "dx": 0.2, "nt": 8, "nx": 8}}),
    );
    let out = dir.path().join("out");
    let o = klspec(&["prop61"], &input, Some(&out));
    assert_eq!(o.status.code(), Some(3));
    let s = summary(&out);
    assert_eq!(s["status"], "refused");
    assert!(s["error"]["message"].as_str().unwrap().contains("renormalization constant Z_C is zero"));
}

#[test]
fn numeric_failure_exits_2() {
    let dir = TempDir::new().unwrap();
    let input = scenario(
        dir.path(),
        "gaussCharge",
        json!({"configuration": {"family": "yukawa", "q": 1.0, "m": 0.01},
               "chargeFunction": {"c1": 1.0, "c2": 2.0, "tau": 0.5, "beta": 1.0},
               "rgrid": [1.0, 2.0, 3.0, 4.0, 10.0], "limit": {"rel": 1e-12, "abs": 1e-15}}),
    );
    let out = dir.path().join("out");
    let o = klspec(&["gauss-charge"], &input, Some(&out));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&out)["error"]["class"], "numeric");
}

#[test]
fn seed_is_echoed_and_tol_overrides() {
    let dir = TempDir::new().unwrap();
    let input = scenario(dir.path(), "etcr", json!({"sigma": [1.0]}));
    let out = dir.path().join("out");
    let o = klspec(&["etcr", "--seed", "42", "--tol", "1e-6"], &input, Some(&out));
    assert!(o.status.success());
    let s = summary(&out);
    assert_eq!(s["seed"], json!(42));
    assert_eq!(s["tolerance"]["rel"], json!(1e-6));
}

#[test]
fn usage_and_scenario_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let input = scenario(dir.path(), "etcr", json!({"sigma": [1.0]}));
    // wrong subcommand for the declared kind
    let o = klspec(&["classify"], &input, Some(&dir.path().join("a")));
    assert_eq!(o.status.code(), Some(3));
    // no output directory anywhere
    let o = klspec(&["etcr"], &input, None);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_klspec")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_klspec")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn output_from_scenario_is_used() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("from-scenario");
    let path = dir.path().join("s.json");
    let doc = json!({"schema": "klspec/scenario/v1", "kind": "etcr", "inputs": {"sigma": [0.0]}, "output": out});
    fs::write(&path, doc.to_string()).unwrap();
    let o = klspec(&["etcr"], &path, None);
    assert!(o.status.success());
    assert_eq!(summary(&out)["result"]["etcrZ"][0]["z"], json!(1.0));
}

#[test]
fn csv_grid_fields_are_loaded() {
    let dir = TempDir::new().unwrap();
    let lat = Lattice { t0: 0.0, x0: 0.0, dt: 0.125, dx: 0.125, nt: 17, nx: 17 };
    let grid = ClassicalField::plane_wave_on_shell(1.0, [1.0, 0.0, 0.0], 1.0).sample(&lat).unwrap();
    let mut buf = Vec::new();
    grid.write_csv(&mut buf).unwrap();
    fs::write(dir.path().join("c.csv"), buf).unwrap();
    let input = scenario(
        dir.path(),
        "compositeResidual",
        json!({"model": {"mC": 1.0, "m": 1.0, "zC": 1.0, "f": {"family": "identity"}},
               "c": {"path": "c.csv"}, "a": {"path": "c.csv"}}),
    );
    let out = dir.path().join("out");
    let o = klspec(&["composite-residual"], &input, Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["result"]["interior"]["nt"], json!(15));
    // truncation error of the five-point box at h = 1/8
    let r = s["result"]["maxAbsResidual"].as_f64().unwrap();
    assert!(r > 0.0 && r < 0.05, "{r}");
    let rows = fs::read_to_string(out.join("compositeResidual.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 15 * 15);
}
