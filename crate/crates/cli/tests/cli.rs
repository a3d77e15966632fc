use std::path::Path;
use std::process::{Command, Output};

fn arcma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arcma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const RUN: &str = r#"
function = "sphere"
dimension = 3
tau_squared = 1
budget_total = 5000
method = "fixed_m"
lambda = 10
mu = 5
seed = 4

[params]
m = 2
"#;

#[test]
fn run_writes_record_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "run.toml", RUN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = arcma(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["fixed_m_sphere_d3_t1_b5000_s4.json", "fixed_m_sphere_d3_t1_b5000_s4.csv"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name}");
    }

    let o = arcma(&["run", "--config", &config, "--out", a.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success());
    assert!(a.join("fixed_m_sphere_d3_t1_b5000_s9.json").exists());
}

#[test]
fn validate_reports_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", RUN);
    let o = arcma(&["validate", "--config", &good]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("run config ok"));

    let bad = write(dir.path(), "bad.toml", &RUN.replace("m = 2", "m = 0"));
    let o = arcma(&["validate", "--config", &bad]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.m"));

    let o = arcma(&["validate", "--preset", "paper"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("preset ok"));

    let eff = write(dir.path(), "eff.toml", "trials = 1\n");
    let o = arcma(&["validate", "--config", &eff]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));
}

#[test]
fn matrix_then_ecdf() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write(
        dir.path(),
        "matrix.toml",
        "functions = [\"sphere\"]\ndimensions = [2]\ntau_squared = [1]\nbudgets = [2000]\nseeds = 3\nlambda = 6\nmu = 3\n[fixed_m]\nm = 2\n[three_stage]\nreevals = [1, 2, 4]\n",
    );
    let out = dir.path().join("results");
    let o = arcma(&["matrix", "--config", &matrix, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("method,function,dimension,tau_squared,budget,runs,mean,se,median\n"));
    assert_eq!(summary.lines().count(), 1 + 3);
    for method in ["ar", "fixed_m", "three_stage"] {
        let ecdf = std::fs::read_to_string(out.join(format!("ecdf_{method}.csv"))).unwrap();
        assert!(ecdf.starts_with("error,fraction\n"));
        assert!(ecdf.trim_end().ends_with(",1.0"));
    }

    let again = dir.path().join("again");
    let o = arcma(&["ecdf", out.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(out.join("summary.csv")).unwrap(),
        std::fs::read(again.join("summary.csv")).unwrap()
    );

    let o = arcma(&["matrix", "--config", &matrix, "--preset", "desk"]);
    assert!(!o.status.success());
}

#[test]
fn efficiency_writes_curve_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "eff.toml", "grid_max = 10\ngrid_points = 4\ntrials = 3\n");
    let out = dir.path().join("eff");
    let o = arcma(&["efficiency", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("efficiency.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(out.join("efficiency.json").exists());
}

#[test]
fn missing_config_is_an_error() {
    let o = arcma(&["run"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}
