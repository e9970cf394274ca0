use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fwsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwsgd")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const BOWL: &str = r#"
[objective]
name = "quadratic_bowl"

[noise]
kind = "isotropic_gaussian"
variance = 0.25

[experiment]
etas = [0.1, 0.05]
runs_per_eta = 20
epsilon = 0.05
x0 = [1.0, 1.0]
master_seed = 1

[report]
abs_floor = 100.0
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("m.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn analyze_writes_graph_and_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = configs().join("himmelblau.toml");
    let o = fwsgd(&["analyze", "--config", cfg.to_str().unwrap(), "--output", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("targets: [0, 2, 6, 8]"));
    for f in ["critical_points.csv", "graph.csv", "graph_closed.csv", "graph.dot", "energy.csv", "energy.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert!(energy.starts_with("# fwsgd "));
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cfg = write_config(dir.path(), BOWL);
    let o = fwsgd(&["report", "--config", &cfg, "--output", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verdict: PASS"));

    // same samples, but a theory slope far outside the allowance
    let cfg = write_config(dir.path(), &BOWL.replace("abs_floor = 100.0", "theory_slope = 300.0"));
    let o = fwsgd(&["report", "--config", &cfg, "--output", out]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).contains("verdict: FAIL"));
    let verdict = std::fs::read_to_string(dir.path().join("out/verdict.txt")).unwrap();
    assert!(verdict.contains("verdict: FAIL"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fwsgd(&["analyze"])), 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&fwsgd(&["analyze", "--config", missing.to_str().unwrap()])), 2);
    let cfg = write_config(dir.path(), &BOWL.replace("quadratic_bowl", "no_such_landscape"));
    let o = fwsgd(&["analyze", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("fwsgd: "));
    let cfg = write_config(dir.path(), &format!("{BOWL}\nunknown = 1\n"));
    assert_eq!(code(&fwsgd(&["analyze", "--config", &cfg])), 2);
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BOWL);
    let run = |sub: &str, jobs: &str| {
        let out = dir.path().join(sub);
        let o = fwsgd(&["simulate", "--config", &cfg, "--jobs", jobs, "--output", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        std::fs::read(out.join("samples.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));

    let out = dir.path().join("d");
    let o = fwsgd(&["simulate", "--config", &cfg, "--seed", "9", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let reseeded = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(reseeded.lines().next().unwrap().ends_with("master_seed=9"));
}

#[test]
fn mam_between_camel_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("camel.toml");
    let o = fwsgd(&[
        "mam",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--from",
        "2",
        "--to",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let action: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("action: "))
        .unwrap()
        .parse()
        .unwrap();
    // uphill edge 2 -> 3 of the camel graph
    assert!((action - 0.000658043).abs() < 0.05 * 0.000658043, "{action}");
    assert!(dir.path().join("mam_path.csv").exists());
}
