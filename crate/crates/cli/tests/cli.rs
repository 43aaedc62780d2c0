use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiermetric"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn interior_fixed_points(v: &Value) -> Vec<f64> {
    v["fixed_points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["value"].as_f64().unwrap())
        .filter(|&x| x > 0.0 && x < 1.0)
        .collect()
}

#[test]
fn theta_reports() {
    let dir = tempfile::tempdir().unwrap();
    let eight = json_ok(dir.path(), &["theta", "--graph", "eight"]);
    assert!((interior_fixed_points(&eight)[0] - 0.381966011).abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    assert!(csv.starts_with("p,theta\n0,0\n"));
    assert_eq!(csv.lines().count(), 1002);

    let interval = json_ok(dir.path(), &["theta", "--graph", "interval2"]);
    assert_eq!(interval["fixed_points"].as_array().unwrap().len(), 2);
    let diamond = json_ok(dir.path(), &["theta", "--graph", "diamond"]);
    assert!((interior_fixed_points(&diamond)[0] - 0.618034).abs() < 1e-6);
    assert!(dir.path().join("theta.config.json").is_file());
}

#[test]
fn paths_and_graph_files() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"vertices":["i","m","o"],"edges":[["i","m"],["m","o"],["i","o"]],"in":"i","out":"o"}"#;
    let path = dir.path().join("g.json");
    std::fs::write(&path, doc).unwrap();
    let v = json_ok(dir.path(), &["paths", "--graph", path.to_str().unwrap()]);
    assert_eq!(v["paths"].as_array().unwrap().len(), 2);
    assert_eq!(v["io_graph_distance"], 1);
    assert_eq!(v["classification"]["graph"], "has-shortcut");
}

#[test]
fn lambda_cr_dirac_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(
        dir.path(),
        &["lambda-cr", "--graph", "eight", "--law", "dirac:1", "--n", "100", "--k", "10", "--warmup", "2", "--reps", "2", "--seed", "1"],
    );
    assert!((v["log_lambda_cr"].as_f64().unwrap() + 2f64.ln()).abs() < 1e-8);
}

#[test]
fn lambda_cr_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["lambda-cr", "--law", "dirac:1", "--n", "10"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("seed"));
    assert!(!dir.path().join("lambda_cr.json").exists());
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["stationary", "--law", "lognormal:0.4", "--n", "2000", "--generations", "5", "--seed", "9"];
    json_ok(a.path(), &args);
    json_ok(b.path(), &[&args[..], &["--workers", "1"]].concat());
    for f in ["stationary.csv", "stationary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"law": "dirac:2", "n": 50, "k": 5, "warmup": 1, "reps": 2, "seed": 4}"#).unwrap();
    json_ok(dir.path(), &["lambda-cr", "--config", cfg.to_str().unwrap(), "--n", "60"]);
    let resolved: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("lambda_cr.config.json")).unwrap()).unwrap();
    assert_eq!(resolved["n"], 60);
    assert_eq!(resolved["k"], 5);
    assert_eq!(resolved["law"], "dirac:2");
    assert_eq!(resolved["depth"], 12);
    assert_eq!(resolved["method"], "drift");

    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert!(!run(dir.path(), &["theta", "--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn percolation_toy_at_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(dir.path(), &["percolation-toy", "--p", "0.84375", "--tol", "1e-6"]);
    assert!((v["q_inf"].as_f64().unwrap() - 0.6667).abs() < 1e-4);
}

#[test]
fn sierpinski_commands() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(dir.path(), &["sierpinski", "theta", "--start", "uniform"]);
    assert_ne!(v["limit"], "unresolved");
    let v = json_ok(dir.path(), &["sierpinski", "theta", "--start", "pair23"]);
    assert_eq!((v["limit"].as_str().unwrap(), v["steps"].as_u64().unwrap()), ("pair23", 0));

    let v = json_ok(
        dir.path(),
        &["sierpinski", "lambda-cr", "--law", "dirac:1", "--n", "50", "--k", "5", "--warmup", "1", "--reps", "1", "--seed", "3"],
    );
    assert!((v["lambda_cr"].as_f64().unwrap() - 0.5).abs() < 1e-8);

    let v = json_ok(
        dir.path(),
        &["sierpinski", "glue", "--law", "lognormal:0.3", "--lambda", "0.5", "--n", "500", "--generations", "4", "--seed", "3"],
    );
    assert_eq!(v["triangle_inequality_holds"], true);
    let csv = std::fs::read_to_string(dir.path().join("triangles.csv")).unwrap();
    assert!(csv.starts_with("x,y,z\n"));
    assert_eq!(csv.lines().count(), 501);
}

#[test]
fn phase_is_supercritical_at_large_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(
        dir.path(),
        &["phase", "--graph", "eight", "--sigma", "0.6", "--n", "5000", "--k", "20", "--warmup", "10", "--reps", "4", "--seed", "2"],
    );
    assert_eq!(v["report"]["phase"], "supercritical");
}

#[test]
fn small_geometry_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let v = json_ok(p, &["brw", "--law", "lognormal:1", "--branching", "2", "--n-max", "12", "--window-lo", "6", "--reps", "5", "--prune", "0", "--seed", "1"]);
    assert!(v["gamma"].as_f64().unwrap() > 0.5);
    assert!(std::fs::read_to_string(p.join("brw.csv")).unwrap().starts_with("level,value\n"));

    let v = json_ok(p, &["cascade", "--law", "lognormal:0.1", "--lambda", "0.53", "--depth", "6", "--leaf", "unit", "--seed", "1"]);
    assert!(v["slope"].as_f64().unwrap() < 0.0);

    json_ok(p, &["geodesic", "--law", "lognormal:0.6", "--lambda", "0.6", "--n", "2000", "--generations", "10", "--depth", "20", "--reps", "3", "--seed", "1"]);
    assert!(std::fs::read_to_string(p.join("geodesic.csv")).unwrap().starts_with("step,Z,ratio\n0,"));

    json_ok(p, &["sweep", "--sigma-grid", "0.1,0.2", "--n", "1000", "--k", "5", "--warmup", "2", "--reps", "2", "--seed", "1"]);
    let sweep = std::fs::read_to_string(p.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("sigma,log2lambda,stderr,overlay_interval,overlay_brw\n"));

    let v = json_ok(p, &["converge", "--n", "2000", "--generations", "10", "--seed", "1"]);
    assert!(v["final_ks"].as_f64().unwrap() < v["initial_ks"].as_f64().unwrap());

    // bisection errs low by at most about ln(1e4) / generations in log lambda
    let v = json_ok(p, &["lambda-cr", "--method", "bisect", "--law", "dirac:1", "--n", "100", "--generations", "400", "--seed", "1"]);
    let l = v["lambda_cr"].as_f64().unwrap();
    assert!(l <= 0.5 + 2e-3 && l >= 0.5 * (-(1e4f64).ln() / 400.0).exp() - 2e-3, "{l}");
}
