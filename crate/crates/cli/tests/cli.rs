use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nhexp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhexp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn last_row(path: &Path) -> Vec<f64> {
    csv_rows(path)
        .last()
        .unwrap()
        .iter()
        .map(|c| c.parse().unwrap())
        .collect()
}

#[test]
fn simulate_particle_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhexp(
        dir.path(),
        &[
            "simulate", "--system", "particle", "--v0", "1,1", "--T", "1", "--steps", "1000",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let traj = dir.path().join("trajectory.csv");
    let rows = csv_rows(&traj);
    assert_eq!(rows.len(), 1001);
    // 17 significant digits in scientific notation.
    let cell = &rows[500][1];
    let mantissa = cell
        .trim_start_matches('-')
        .split('e')
        .next()
        .unwrap()
        .replace('.', "");
    assert_eq!(mantissa.len(), 17, "{cell}");

    let header = fs::read_to_string(&traj)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let cols: Vec<&str> = header.split(',').collect();
    let row = last_row(&traj);
    let q = |name: &str| row[cols.iter().position(|c| *c == name).unwrap()];
    assert!((q("q_1") - 1.0f64.asinh()).abs() < 1e-7);
    assert!((q("q_2") - 1.0).abs() < 1e-7);
    assert!((q("q_3") - (2.0f64.sqrt() - 1.0)).abs() < 1e-7);
}

#[test]
fn simulate_disk_half_turn() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhexp(
        dir.path(),
        &[
            "simulate",
            "--system",
            "disk",
            "--v0",
            "1,3.14159",
            "--steps",
            "1000",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let traj = dir.path().join("trajectory.csv");
    let header = fs::read_to_string(&traj)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let cols: Vec<&str> = header.split(',').collect();
    let row = last_row(&traj);
    let y = row[cols.iter().position(|c| *c == "q_2").unwrap()];
    assert!((y - std::f64::consts::FRAC_2_PI).abs() < 1e-4, "{y}");
}

#[test]
fn zero_velocity_gives_constant_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhexp(
        dir.path(),
        &[
            "simulate", "--system", "particle", "--v0", "0,0", "--steps", "10",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 11);
    let first: Vec<&String> = rows[0].iter().skip(1).collect();
    assert!(rows
        .iter()
        .all(|r| r.iter().skip(1).collect::<Vec<_>>() == first));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        nhexp(dir.path(), &["simulate", "--system", "unicycle"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nhexp(dir.path(), &["simulate", "--steps", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nhexp(dir.path(), &["simulate", "--steps", "many"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        nhexp(dir.path(), &["gauss-check", "--metric", "nope"])
            .status
            .code(),
        Some(2)
    );
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(nhexp(empty.path(), &["report"]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# particle run\nsystem = particle\nsteps = 20\n\nv0 = 0.5,0.5\n",
    )
    .unwrap();
    let cfg_arg = cfg.to_str().unwrap();
    let out = nhexp(dir.path(), &["simulate", "--config", cfg_arg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("trajectory.csv")).len(), 21);
    let out = nhexp(
        dir.path(),
        &["simulate", "--config", cfg_arg, "--steps", "40"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("trajectory.csv")).len(), 41);

    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(
        nhexp(dir.path(), &["simulate", "--config", cfg_arg])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gauss_check_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    for (metric, verdict) in [
        ("example53", "PASS"),
        ("flat", "PASS"),
        ("pullback:particle", "FAIL"),
    ] {
        let out = nhexp(dir.path(), &["gauss-check", "--metric", metric]);
        assert_eq!(out.status.code(), Some(0), "{metric}");
        let json = read_json(&dir.path().join("gauss.json"));
        assert_eq!(
            json["verdict"].as_str().unwrap().to_uppercase(),
            verdict,
            "{metric}"
        );
    }
    let json = read_json(&dir.path().join("gauss.json"));
    let max = json["max_residual"].as_f64().unwrap();
    assert!(max > 0.04 && max < 0.06, "{max}");
}

#[test]
fn minimize_recovers_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "minimize",
        "--metric",
        "example53",
        "--from",
        "0,0",
        "--to",
        "0.5,0.5",
        "--seed",
        "7",
        "--jitter",
        "0.01",
    ];
    let out = nhexp(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = read_json(&dir.path().join("minimize.json"));
    let len = json["final_length"].as_f64().unwrap();
    assert!((len - 0.5f64.sqrt()).abs() < 1e-6, "{len}");
    assert!(json["final_length"].as_f64().unwrap() <= json["initial_length"].as_f64().unwrap());
    assert_eq!(json["monotone"], Value::Bool(true));
    assert!(json["distance_to_radial"].as_f64().unwrap() < 1e-3);

    // Same seed, same bytes.
    let first = fs::read(dir.path().join("minimize_curve.csv")).unwrap();
    let again = tempfile::tempdir().unwrap();
    assert_eq!(nhexp(again.path(), &args).status.code(), Some(0));
    assert_eq!(
        fs::read(again.path().join("minimize_curve.csv")).unwrap(),
        first
    );
}

#[test]
fn report_merges_verify_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhexp(
        dir.path(),
        &["verify-theorem", "--system", "particle", "--metric", "flat"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 5, "{stdout}");
    assert_eq!(
        nhexp(dir.path(), &["simulate", "--steps", "50"])
            .status
            .code(),
        Some(0)
    );

    assert_eq!(nhexp(dir.path(), &["report"]).status.code(), Some(0));
    let report = read_json(&dir.path().join("report.json"));
    let stages = report["stages"].as_object().unwrap();
    assert_eq!(stages.len(), 5);
    assert!(stages.values().all(|s| s == "PASS"));
    assert!(!report["discrepancy_notes"].as_array().unwrap().is_empty());
    let plots = report["plots"].as_object().unwrap();
    assert_eq!(plots["plot_speed.csv"]["rows"].as_u64(), Some(51));
    assert_eq!(csv_rows(&dir.path().join("plot_speed.csv")).len(), 51);
    let induced = csv_rows(&dir.path().join("verify_induced.csv")).len() as u64;
    assert_eq!(
        plots["plot_verify_residual.csv"]["rows"].as_u64(),
        Some(induced)
    );
}

#[test]
fn report_accepts_induced_pullback_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhexp(dir.path(), &["pullback", "--metric", "induced:particle", "--grid", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(nhexp(dir.path(), &["report"]).status.code(), Some(0));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["plots"]["plot_pullback.csv"]["x"], "x");
    assert_eq!(report["plots"]["plot_pullback.csv"]["rows"].as_u64(), Some(25));
}
