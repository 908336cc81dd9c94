use std::path::Path;
use std::process::{Command, Output};

fn topolearn(args: &[&str], out: &Path) -> Output {
    let output = Command::new(env!("CARGO_BIN_EXE_topolearn"))
        .args(args)
        .env("TOPOLEARN_OUT_DIR", out)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const CONFIG: &str = r#"{
  "graph": { "model": "er", "probability": 0.2, "n": 10, "seed": 3 },
  "stream": {
    "p": 200,
    "noise_variance": 0.01,
    "change_points": [ { "at": 100, "fraction": 0.2 } ]
  },
  "solvers": [
    { "algo": "opadmm", "alpha": 1.0, "beta": 1.0, "schedule": { "mode": "fixed", "gamma": 0.01 } },
    { "algo": "pg", "alpha": 1.0, "beta": 1.0 }
  ],
  "grid": { "alpha": [0.1, 1.0], "beta": [0.1, 1.0], "rho": [1.0], "tau1": [0.01, 0.05], "tau2": [0.5, 0.9] },
  "metrics": ["suboptimality", "regret", "fscore"],
  "regret_stride": 50,
  "record_wall_time": false
}"#;

#[test]
fn generate_writes_signals_truths_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    topolearn(
        &["--seed", "5", "generate", "--model", "pa", "--n", "12", "--p", "50", "--change-at", "25"],
        dir.path(),
    );
    let signals = read(&dir.path().join("signals.csv"));
    assert_eq!(signals.lines().count(), 50);
    assert!(signals.lines().all(|l| l.split(',').count() == 12));
    for i in 0..2 {
        let truth = read(&dir.path().join(format!("truth_segment_{i}.csv")));
        assert_eq!(truth.lines().next().unwrap(), "i,j,weight");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["graph"]["model"], "pa");
    assert_eq!(manifest["segments"].as_array().unwrap().len(), 2);
}

#[test]
fn same_seed_same_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = ["generate", "--model", "pa", "--n", "10", "--p", "20"];
    topolearn(&[&["--seed", "9"], &args[..]].concat(), a.path());
    topolearn(&[&["--seed", "9"], &args[..]].concat(), b.path());
    topolearn(&[&["--seed", "10"], &args[..]].concat(), c.path());
    let sig = |d: &tempfile::TempDir| read(&d.path().join("signals.csv"));
    assert_eq!(sig(&a), sig(&b));
    assert_ne!(sig(&a), sig(&c));
}

#[test]
fn out_dir_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    topolearn(
        &["generate", "--n", "6", "--p", "5", "--model", "er", "--out-dir", flag_dir.path().to_str().unwrap()],
        env_dir.path(),
    );
    assert!(flag_dir.path().join("signals.csv").exists());
    assert!(!env_dir.path().join("signals.csv").exists());
}

#[test]
fn batch_on_generated_signals() {
    let dir = tempfile::tempdir().unwrap();
    topolearn(&["generate", "--model", "er", "--n", "10", "--p", "100"], dir.path());
    let signals = dir.path().join("signals.csv");
    let out = topolearn(
        &["batch", signals.to_str().unwrap(), "--alpha", "1", "--beta", "0.5"],
        dir.path(),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("converged"), "{stdout}");
    assert!(stdout.contains("degree min"));
    let weights = read(&dir.path().join("weights.csv"));
    assert!(weights.lines().count() > 1);
    let trace = read(&dir.path().join("trace.csv"));
    assert_eq!(trace.lines().next().unwrap(), "iter,w_change,primal_residual,objective");
}

#[test]
fn online_from_file_and_generator() {
    let dir = tempfile::tempdir().unwrap();
    topolearn(&["generate", "--model", "er", "--n", "8", "--p", "120"], dir.path());
    let signals = dir.path().join("signals.csv");
    topolearn(
        &[
            "online",
            "--signals",
            signals.to_str().unwrap(),
            "--gamma",
            "fixed:0.01",
            "--regret-stride",
            "40",
            "--no-wall-time",
        ],
        dir.path(),
    );
    let csv = read(&dir.path().join("online_opadmm.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,suboptimality,objective,regret_partial,wall_time_us");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 120);
    assert!(rows[39].split(',').nth(3).unwrap().parse::<f64>().is_ok());
    assert!(rows[0].split(',').nth(3).unwrap().is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",0")));

    topolearn(
        &["--seed", "2", "online", "--algo", "pg", "--model", "pa", "--n", "10", "--p", "60", "--change-at", "30"],
        dir.path(),
    );
    assert_eq!(read(&dir.path().join("online_pg.csv")).lines().count(), 61);
    assert!(dir.path().join("online_pg_weights.csv").exists());
}

#[test]
fn report_and_grid_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    topolearn(&["report", config.to_str().unwrap()], &out);
    assert!(read(&out.join("run_0_opadmm.csv")).lines().count() == 201);
    assert!(out.join("run_1_pg.csv").exists());
    assert!(read(&out.join("suboptimality.svg")).contains("<polyline"));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);

    topolearn(&["grid", config.to_str().unwrap()], &out);
    let grid: serde_json::Value = serde_json::from_str(&read(&out.join("grid.json"))).unwrap();
    assert!(grid["regularizers"]["alpha"].as_f64().is_some());
    assert!(grid["solver"]["best"]["rho"].as_f64().is_some());
    // both τ₁ values sit under 1/(2(n−1)) ≈ 0.056
    assert_eq!(grid["solver"]["skipped"].as_array().unwrap().len(), 0);
}

#[test]
fn report_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    topolearn(&["--seed", "4", "report", config.to_str().unwrap()], &a);
    topolearn(&["--seed", "4", "report", config.to_str().unwrap()], &b);
    for f in ["run_0_opadmm.csv", "run_1_pg.csv", "summary.json", "suboptimality.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_topolearn"))
        .args(["online", "--gamma", "fixed:2", "--n", "5", "--p", "5"])
        .env("TOPOLEARN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(!status.status.success());

    let config = dir.path().join("empty.json");
    std::fs::write(&config, CONFIG.replace(r#""algo": "opadmm""#, r#""algo": "nope""#)).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_topolearn"))
        .args(["report", config.to_str().unwrap()])
        .env("TOPOLEARN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("parsing"));
}
