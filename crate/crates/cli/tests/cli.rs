use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinwave"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.starts_with('{'))
        .expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn every_recipe_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    for recipe in [
        "prepare_six",
        "rotation_sweep",
        "arbitrary_axis",
        "qpt_gates",
        "fringe",
        "stark_report",
    ] {
        let cfg = configs().join(format!("{recipe}.toml"));
        let out_path = dir.path().join(format!("{recipe}.json"));
        let sub = recipe.replace('_', "-");
        let out = run(&[
            &sub,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{recipe}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
        assert_eq!(report["results"]["recipe"], recipe);
        assert_eq!(report["schema_version"], 1);
    }
}

#[test]
fn sweep_writes_csv_per_axis() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sweep.json");
    let out = run(&["rotation-sweep", "--seed", "5", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    for axis in ["x", "y", "z"] {
        let text = std::fs::read_to_string(dir.path().join(format!("sweep_{axis}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("angle_rad,s_x,s_y,s_z,fidelity,fidelity_std"));
        assert_eq!(lines.count(), 12);
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = run(&["prepare-six", "--seed", "17"]);
    let b = run(&["prepare-six", "--seed", "17"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["prepare-six", "--seed", "18"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn echoed_config_regenerates_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&["qpt-gates", "--seed", "9", "--preset", "paper-noise"]);
    assert!(first.status.success());
    let report: Value = serde_json::from_slice(&first.stdout).unwrap();
    let echo = write(dir.path(), "echo.json", &report["config"].to_string());
    let second = run(&["qpt-gates", "--config", echo.to_str().unwrap()]);
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn thread_count_does_not_change_reports() {
    for sub in ["fringe", "arbitrary-axis"] {
        let one = bin()
            .args([sub, "--seed", "4"])
            .env("RAYON_NUM_THREADS", "1")
            .output()
            .unwrap();
        let many = bin()
            .args([sub, "--seed", "4"])
            .env("RAYON_NUM_THREADS", "6")
            .output()
            .unwrap();
        assert!(one.status.success());
        assert_eq!(one.stdout, many.stdout, "{sub}");
    }
}

#[test]
fn invalid_config_is_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "schema_version = 2\nrecipe = \"prepare_six\"\nseed = 1\nshots_per_basis = 10\n",
    );
    let out = run(&["prepare-six", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "config");
    assert!(out.stdout.is_empty());

    let zero = write(
        dir.path(),
        "zero.toml",
        "schema_version = 1\nrecipe = \"prepare_six\"\nseed = 1\nshots_per_basis = 0\n",
    );
    assert_eq!(
        run(&["prepare-six", "--config", zero.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let other = configs().join("fringe.toml");
    let out = run(&["prepare-six", "--config", other.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "config");
}

#[test]
fn stark_report_exit_codes() {
    let out = run(&["stark-report"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["results"]["all_pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(configs().join("stark_report.toml")).unwrap();
    let dark = write(
        dir.path(),
        "dark.toml",
        &base.replace("power_w = 0.007", "power_w = 0.0"),
    );
    let out = run(&["stark-report", "--config", dark.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["results"]["effective"]["rabi_qubit"], 0.0);
    assert_eq!(report["results"]["effective"]["stark_aux"], 0.0);

    let resonant = write(
        dir.path(),
        "resonant.toml",
        &base.replace("detuning_rad_s = 0.0", "detuning_rad_s = 2565600490.110026"),
    );
    let out = run(&["stark-report", "--config", resonant.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_json(&out)["message"].as_str().unwrap().contains("resonant"));
}

#[test]
fn compile_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = dir.path().join("x.json");
    let out = run(&[
        "compile",
        "--axis",
        "1",
        "0",
        "0",
        "--angle",
        "0.7853981633974483",
        "--out",
        schedule.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let pulses: Value = serde_json::from_str(&std::fs::read_to_string(&schedule).unwrap()).unwrap();
    assert_eq!(pulses[0]["kind"], "RamanPulse");

    // a quarter turn about x takes |s_↓⟩ to s_y = -1
    let out = run(&["simulate", schedule.to_str().unwrap()]);
    assert!(out.status.success());
    let result: Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &result["readout_stokes"];
    assert!((s["y"].as_f64().unwrap() + 1.0).abs() < 1e-9, "{s}");
}

#[test]
fn reconstruct_counts_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("input_label,basis,n_plus,n_minus\n");
    // identity channel on the six cardinal inputs, 1000 counts per basis
    for (label, s) in [
        ("down", [0.0, 0.0, 1.0]),
        ("up", [0.0, 0.0, -1.0]),
        ("D", [1.0, 0.0, 0.0]),
        ("A", [-1.0, 0.0, 0.0]),
        ("R", [0.0, 1.0, 0.0]),
        ("L", [0.0, -1.0, 0.0]),
    ] {
        for (b, v) in ["X", "Y", "Z"].iter().zip(s) {
            let plus = (500.0 * (1.0 + v)) as u64;
            text.push_str(&format!("{label},{b},{plus},{}\n", 1000 - plus));
        }
    }
    let counts = write(dir.path(), "counts.csv", &text);
    let out = run(&["reconstruct", counts.to_str().unwrap(), "--bootstrap", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["states"].as_array().unwrap().len(), 6);
    assert!(report["process"]["fidelity_to_identity"].as_f64().unwrap() > 0.9999);

    let broken = write(dir.path(), "broken.csv", "input_label,basis,n_plus,n_minus\nx,Q,1,1\n");
    assert_eq!(run(&["reconstruct", broken.to_str().unwrap()]).status.code(), Some(1));
}
