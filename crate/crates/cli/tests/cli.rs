use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SAMPLE_K1: &str = r#"{"U": "1 - s*cos(s) + sin(s)", "h": 0.2, "m": 1, "eps0": 1, "eps1": 1, "eps2": -1, "k": 1, "J": [-0.8, 0.8]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bour-edge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn datum_file(dir: &TempDir) -> String {
    let p = dir.path().join("example.json");
    fs::write(&p, SAMPLE_K1).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invariants_of_the_example() {
    let dir = TempDir::new().unwrap();
    let o = run(&["invariants", "--datum", &datum_file(&dir)]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["kappa_nu"]["closed"].as_f64().unwrap() - 0.9798).abs() < 1e-4);
    assert_eq!(v["kappa_t"]["closed"].as_f64().unwrap(), 0.2);
    assert!(v["max_discrepancy"].as_f64().unwrap() < 1e-6);
    assert!((v["jacobian_det"].as_f64().unwrap() - 1.02062).abs() < 1e-4);
}

#[test]
fn classify_curve_tag() {
    let o = run(&["classify-curve", "--expr-x", "s^2", "--expr-y", "s^7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["tag"], "7/2");
}

#[test]
fn classify_both_routes() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    for extra in [&[][..], &["--via-profile"][..]] {
        let mut args = vec!["classify", "--datum", &f];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert_eq!(stdout_json(&o)["tag"], "3/2");
    }
}

#[test]
fn build_writes_obj_and_csv() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    let out = dir.path().join("mesh");
    let o = run(&["build", "--datum", &f, "--h", "0.1", "--rows", "7", "--cols", "9", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let obj = fs::read_to_string(out.join("mesh.obj")).unwrap();
    let first = obj.lines().next().unwrap();
    assert!(first.starts_with("# bour-edge ") && first.contains("\"h\":0.1"));
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 63);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 48);
    let csv = fs::read_to_string(out.join("fundamental_form.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("s,t,E,F,G"));
    assert_eq!(csv.lines().count(), 64);
    let datum: Value = serde_json::from_str(&fs::read_to_string(out.join("datum.json")).unwrap()).unwrap();
    assert_eq!(datum["h"], 0.1);
    assert_eq!(datum["eps2"], -1);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    let mut seen = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let o = bin()
            .env("BOUR_EDGE_THREADS", threads)
            .args(["build", "--datum", &f, "--rows", "9", "--cols", "5", "--out", path_str(&out)])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        seen.push((
            fs::read(out.join("mesh.obj")).unwrap(),
            fs::read(out.join("fundamental_form.csv")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
    let a = run(&["invariants", "--datum", &f]).stdout;
    let b = run(&["invariants", "--datum", &f]).stdout;
    assert_eq!(a, b);
}

#[test]
fn validation_failure_exits_one_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    let out = dir.path().join("bad");
    let o = run(&["validate", "--datum", &f, "--h", "1.5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["valid"], false);
    assert_eq!(report["report"]["star_ok"], false);

    let out2 = dir.path().join("bad_build");
    let o = run(&["build", "--datum", &f, "--h", "1.5", "--out", path_str(&out2)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(out2.join("validation.json").exists());
    assert!(!out2.join("mesh.obj").exists());
}

#[test]
fn valid_datum_passes_validation() {
    let dir = TempDir::new().unwrap();
    let o = run(&["validate", "--datum", &datum_file(&dir)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["valid"], true);
}

#[test]
fn inline_datum_without_file() {
    let o = run(&[
        "invariants", "--U", "1 - s*cos(s) + sin(s)", "--k", "1", "--J", "-0.8,0.8", "--h", "0.2", "--eps2", "-1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["kappa_t"]["closed"].as_f64(), Some(0.2));
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["invariants"]).status.code(), Some(2));
    assert_eq!(run(&["invariants", "--datum", "/nonexistent/x.json"]).status.code(), Some(2));
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"U\": ").unwrap();
    assert_eq!(run(&["invariants", "--datum", path_str(&broken)]).status.code(), Some(2));
    assert_eq!(run(&["classify-curve", "--expr-x", "sin(", "--expr-y", "s"]).status.code(), Some(2));
}

#[test]
fn json_errors_on_stderr() {
    let o = run(&["invariants", "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"], "usage");
    let dir = TempDir::new().unwrap();
    let o = run(&["invert", "--json", "--datum", &datum_file(&dir), "--kappa-nu", "-1", "--kappa-t", "0.2"]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"], "validation");
}

#[test]
fn invert_recovers_parameters() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    let target = stdout_json(&run(&["invariants", "--datum", &f, "--h", "0.1", "--m", "1.05"]));
    let kn = target["kappa_nu"]["closed"].as_f64().unwrap().to_string();
    let kt = target["kappa_t"]["closed"].as_f64().unwrap().to_string();
    let o = run(&["invert", "--datum", &f, "--kappa-nu", &kn, "--kappa-t", &kt]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["h"].as_f64().unwrap() - 0.1).abs() < 1e-8);
    assert!((v["m"].as_f64().unwrap() - 1.05).abs() < 1e-8);
}

#[test]
fn deform_exports_family() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    let out = dir.path().join("family");
    let o = run(&[
        "deform", "--datum", &f, "--h-span", "0,1.5", "--m-span", "1,1", "--nh", "2", "--nm", "1", "--rows", "5",
        "--cols", "5", "--out", path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("member_h0_m1.obj").exists());
    assert!(!out.join("member_h1.5_m1.obj").exists());
    let csv = fs::read_to_string(out.join("family.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,m,valid,kappa_nu,kappa_t,edge_type");
    assert!(lines[1].contains(",true,") && lines[1].ends_with(",3/2"));
    assert!(lines[2].contains(",false,"));
}

#[test]
fn isomers_and_roundtrip() {
    let dir = TempDir::new().unwrap();
    let f = datum_file(&dir);
    let out = dir.path().join("iso");
    let o = run(&["isomers", "--datum", &f, "--rows", "5", "--cols", "5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["variants"].as_array().unwrap().len(), 4);
    assert!(v["metric_delta"].as_f64().unwrap() < 1e-8);
    for name in ["isomer_pp.obj", "isomer_pm.obj", "isomer_mp.obj", "isomer_mm.obj"] {
        assert!(out.join(name).exists());
    }
    let rt = dir.path().join("rt");
    let o = run(&["roundtrip", "--datum", &f, "--out", path_str(&rt)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout_json(&o)["report"]["sup_error_u"].as_f64().unwrap() < 1e-6);
    let chart: Value = serde_json::from_str(&fs::read_to_string(rt.join("chart.json")).unwrap()).unwrap();
    assert!(chart["U"].as_array().unwrap().len() >= 2);
}
