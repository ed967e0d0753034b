use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abc-rates"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SCALING: &str = r#"{"experiment": "acceptance-scaling", "n": [400, 900, 1600], "k0": 0, "accepted": 2000, "seed": 3}"#;

#[test]
fn rerun_gives_byte_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "shape.json",
        r#"{"experiment": "shape", "n": [1000, 4000], "k0": 1, "accepted": 2000, "bins": 20, "seed": 8}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "shape",
            "--config",
            &cfg,
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut compared = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") {
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{name:?}"
            );
            compared += 1;
        }
    }
    assert_eq!(compared, 6);
}

#[test]
fn summary_has_the_documented_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SCALING);
    let out = dir.path().join("out");
    let o = run(&[
        "acceptance-scaling",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for key in ["config", "results", "runtime_seconds", "version"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["config"]["seed"], 3);
    assert_eq!(summary["results"]["predicted_slope"], -0.5);
    let csv = fs::read_to_string(out.join("acceptance_scaling.csv")).unwrap();
    assert!(csv.starts_with("n,epsilon,simulations,accepted,acceptance_rate,acceptance_rate_se\n"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noseed.json",
        r#"{"n": [400, 900, 1600], "k0": 0, "accepted": 1000}"#,
    );
    let out = dir.path().join("out");
    let o = run(&[
        "acceptance-scaling",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "seed is mandatory");
    let o = run(&[
        "acceptance-scaling",
        "--config",
        &cfg,
        "--seed",
        "41",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 41);
    assert_eq!(summary["config"]["experiment"], "acceptance-scaling");
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let single = write_config(
        dir.path(),
        "single.json",
        r#"{"experiment": "risk", "epsilons": [0.05], "seed": 1}"#,
    );
    let o = run(&["risk", "--config", &single, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 6 tolerances"));

    let cfg = write_config(dir.path(), "scaling.json", SCALING);
    assert_eq!(
        code(&run(&["shape", "--config", &cfg, "--out", out])),
        2,
        "experiment mismatch"
    );
    let bad = write_config(dir.path(), "bad.json", "{not json");
    assert_eq!(code(&run(&["shape", "--config", &bad, "--out", out])), 2);
    assert_eq!(
        code(&run(&[
            "shape",
            "--config",
            "/nonexistent/c.json",
            "--out",
            out
        ])),
        2
    );
    let unknown = write_config(
        dir.path(),
        "unknown.json",
        r#"{"experiment": "shape", "seed": 1, "colour": "red"}"#,
    );
    assert_eq!(
        code(&run(&["shape", "--config", &unknown, "--out", out])),
        2
    );
    assert_eq!(code(&run(&["shape", "--out", out])), 2, "missing --config");
}

#[test]
fn zero_acceptances_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tiny.json",
        r#"{"experiment": "shape", "n": [1000], "k0": 2, "max_draws": 10, "sampler": "prior", "seed": 1}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["shape", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(
        out.join("summary.json").exists(),
        "outcome is still recorded"
    );
}

#[test]
fn failed_scaling_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // ε = 3/√n is a sizeable fraction of the prior, far from the asymptotic
    // regime; the fitted slope (≈ −1.34) misses −1.5 by more than 0.1
    let cfg = write_config(
        dir.path(),
        "wide.json",
        r#"{"experiment": "acceptance-scaling", "n": [40, 80, 160], "k0": 2, "c": 3.0, "accepted": 2000, "tolerance": 0.1, "seed": 1}"#,
    );
    let out = dir.path().join("out");
    let o = run(&[
        "acceptance-scaling",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
}
