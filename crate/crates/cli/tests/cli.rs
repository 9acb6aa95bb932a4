use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sepfluct(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sepfluct"));
    cmd.args(args);
    for k in ["SEPFLUCT_SEED", "SEPFLUCT_REPLICAS", "SEPFLUCT_THREADS", "SEPFLUCT_OUT"] {
        cmd.env_remove(k);
    }
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let out = dir.join("out");
    let text = format!("output = {:?}\n{body}", out.to_str().unwrap());
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

const SMALL: &str = r#"
name = "small"
seed = 7
replicas = 200
functions = [[1], [-2]]
suites = ["variance", "martingale", "gamma-mean"]

[manifold]
kind = "circle"

[grid]
sizes = [60, 120]
seed = 3

[dynamics]
horizon = 0.5
samples = 5
"#;

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let first = sepfluct(&["run", &cfg], &[]);
    assert!(matches!(code(&first), 0 | 1), "{}", String::from_utf8_lossy(&first.stderr));
    let out = tmp.path().join("out");
    for f in ["report.json", "checks.csv", "summary.txt", "grids/grid-n60.bin", "grids/grid-n120.bin", "tables/variance-variance.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let a = report(tmp.path());
    assert!(a["header"]["generated_unix"].is_u64());
    let second = sepfluct(&["run", &cfg], &[]);
    assert_eq!(code(&first), code(&second));
    let b = report(tmp.path());
    let body = |v: &Value| serde_json::to_string_pretty(&v["body"]).unwrap();
    assert_eq!(body(&a), body(&b));

    // Every check carries its claim, estimate, oracle, tolerance and verdict.
    for s in a["body"]["suites"].as_array().unwrap() {
        for c in s["checks"].as_array().unwrap() {
            for key in ["name", "claim", "estimate", "oracle", "tolerance", "pass"] {
                assert!(c.get(key).is_some(), "check without {key}: {c}");
            }
            assert!(!c["claim"].as_str().unwrap().is_empty());
        }
    }

    // `report` replays the verdict.
    let r = sepfluct(&["report", out.to_str().unwrap()], &[]);
    assert_eq!(code(&r), code(&first));
    assert!(String::from_utf8_lossy(&r.stdout).contains("checks passed"));
}

#[test]
fn results_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    sepfluct(&["run", &cfg, "--threads", "1"], &[]);
    let one = report(tmp.path());
    sepfluct(&["run", &cfg, "--threads", "3"], &[]);
    let three = report(tmp.path());
    assert_eq!(one["body"]["suites"], three["body"]["suites"]);
    assert_eq!(three["body"]["config"]["threads"], 3);
}

#[test]
fn flags_and_environment_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let alt = tmp.path().join("alt");
    let o = sepfluct(&["run", &cfg, "--seed", "11"], &[("SEPFLUCT_REPLICAS", "50"), ("SEPFLUCT_OUT", alt.to_str().unwrap())]);
    assert!(matches!(code(&o), 0 | 1));
    let v: Value = serde_json::from_str(&fs::read_to_string(alt.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["body"]["config"]["replicas"], 50);
    assert_eq!(v["body"]["config"]["seed"], 11);
}

#[test]
fn invalid_config_exits_2_with_field_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("horizon = 0.5", "horizon = 0.5\nrho = 1.2").replace("[60, 120]", "[120, 60]"));
    let o = sepfluct(&["run", &cfg], &[]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dynamics.rho") && err.contains("grid.sizes"), "{err}");
    assert!(!tmp.path().join("out/report.json").exists());
}

#[test]
fn io_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&sepfluct(&["run", missing.to_str().unwrap()], &[])), 3);
    assert_eq!(code(&sepfluct(&["report", tmp.path().to_str().unwrap()], &[])), 3);
    let bogus = tmp.path().join("bogus.bin");
    fs::write(&bogus, b"not a grid").unwrap();
    assert_eq!(code(&sepfluct(&["grid", "inspect", bogus.to_str().unwrap()], &[])), 3);
}

#[test]
fn grid_build_then_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("g.bin");
    let f = file.to_str().unwrap();
    let o = sepfluct(&["grid", "build", "--manifold", "torus2", "-n", "300", "--seed", "5", "--out", f], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = sepfluct(&["grid", "inspect", f], &[]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("torus2") && text.contains("300") && text.contains("seed          5"), "{text}");
}

#[test]
fn brute_force_suite_on_six_points() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
seed = 2
replicas = 20000
functions = [[1], [-1]]
suites = ["brute-force"]
[manifold]
kind = "circle"
[grid]
sizes = [6]
seed = 1
[dynamics]
horizon = 1.0
samples = 4
[checks]
tv_tolerance = 0.05
"#;
    let cfg = write_config(tmp.path(), body);
    let o = sepfluct(&["run", &cfg], &[]);
    let v = report(tmp.path());
    let checks = v["body"]["suites"][0]["checks"].as_array().unwrap();
    let duality: Vec<_> = checks.iter().filter(|c| c["name"].as_str().unwrap().contains("duality")).collect();
    assert_eq!(duality.len(), 12);
    for c in duality {
        assert_eq!(c["pass"], true, "{c}");
        assert_eq!(c["tolerance"], 1e-8);
    }
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // An unattainable tolerance turns into a check failure, exit 1.
    let cfg = write_config(tmp.path(), &body.replace("tv_tolerance = 0.05", "tv_tolerance = 1e-9"));
    assert_eq!(code(&sepfluct(&["run", &cfg], &[])), 1);
}

#[test]
fn laplacian_convergence_ladder() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
functions = [[1], [2]]
suites = ["laplacian-convergence"]
[manifold]
kind = "circle"
[grid]
sizes = [500, 1000, 2000]
seed = 1000
[checks]
trend_seeds = 5
"#;
    let cfg = write_config(tmp.path(), body);
    sepfluct(&["run", &cfg], &[]);
    let v = report(tmp.path());
    let suite = &v["body"]["suites"][0];
    let rows = suite["tables"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let names: Vec<&str> = suite["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.iter().any(|n| n.contains("trend")), "{names:?}");
    assert!(names.iter().any(|n| n.contains("threshold")), "{names:?}");
}
