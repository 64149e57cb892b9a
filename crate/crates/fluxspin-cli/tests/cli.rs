//! Command-line contract tests: exit codes, config validation messages,
//! output-file shape, the replay invariant, and plot emission.

use std::path::{Path, PathBuf};
use std::process::Output;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fluxspin")
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin()).args(args).output().unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SIMULATE_BODY: &str = r#"
schema_version = 1

[simulate]
t_max = 1.5
points = 25
spin = [1.0, 0.0, 0.0]
[simulate.spec]
rates = [[0.0, 1.0], [0.8, 0.0]]
omegas = [[0.0, 0.0, 1.5], [0.2, 0.0, 1.1]]
"#;

#[test]
fn missing_config_flag_is_a_config_error() {
    let out = run(&["simulate"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("--config"));
}

#[test]
fn unreadable_config_path_is_a_config_error() {
    let out = run(&["simulate", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
schema_version = 1

[simulate]
t_max = 1.0
points = 10
spin = [1.0, 0.0, 0.0]
typo_knob = 3
[simulate.spec]
rates = [[0.0, 1.0], [0.8, 0.0]]
omegas = [[0.0, 0.0, 1.5], [0.2, 0.0, 1.1]]
"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr_of(&out).contains("typo_knob"),
        "error should name the offending key: {}",
        stderr_of(&out)
    );
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SIMULATE_BODY.replace("schema_version = 1", "schema_version = 99"));
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("schema"));
}

#[test]
fn missing_verb_section_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE_BODY);
    let out = run(&["sweetspot", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr_of(&out).contains("[sweetspot]"),
        "error should name the missing section: {}",
        stderr_of(&out)
    );
}

#[test]
fn zero_workers_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE_BODY);
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--workers", "0"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn simulate_writes_table_and_envelope_with_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE_BODY);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));

    let csv = std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    assert!(!csv.contains('\r'), "tables use LF line endings only");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t_us,sx,sy,sz,p_1,p_2");
    assert_eq!(lines.len(), 1 + 25, "header plus one row per grid point");
    // No second header anywhere.
    assert_eq!(csv.matches("t_us").count(), 1);

    let envelope: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(envelope["command"], "simulate");
    assert_eq!(envelope["points_total"], 25);
    assert_eq!(envelope["points_valid"], 25);
    assert!(envelope["tool"]["version"].is_string());
    assert!(envelope["wall_clock"]["started_unix_ms"].is_u64());
    // The echoed configuration is fully resolved.
    assert!(envelope["config"]["seed"].is_u64());
    assert!(envelope["config"]["workers"].is_u64());
    // No plot was requested, none written.
    assert!(!out_dir.join("simulate.svg").exists());
}

#[test]
fn plot_flag_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE_BODY);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--plot",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    let svg = std::fs::read_to_string(out_dir.join("simulate.svg")).unwrap();
    assert!(svg.starts_with("<svg"), "plot should be a standalone vector graphic");
    assert!(svg.contains("</svg>"));
}

#[test]
fn degenerate_scan_points_give_partial_failure_with_outputs() {
    // The critically damped point has no single-exponential rate, so the
    // only scan point fails; outputs must still be written, exit code 3.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
schema_version = 1

[crossover]
r_ab = 0.5
r_ba = 0.5
deltas_over_rtot = [1.0]
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "crossover",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3, "{}", stderr_of(&out));
    let csv = std::fs::read_to_string(out_dir.join("crossover.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with("false"));
    let envelope: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("crossover.json")).unwrap()).unwrap();
    assert_eq!(envelope["points_valid"], 0);
    assert_eq!(envelope["points_total"], 1);
}

#[test]
fn defective_spec_fails_with_degeneracy_exit_code() {
    // A spec whose splitting exactly matches the switching rate has a
    // defective generator; rate extraction refuses it outright.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
schema_version = 1

[sweetspot]
[sweetspot.spec]
rates = [[0.0, 0.5], [0.5, 0.0]]
omegas = [[0.0, 0.0, 0.5], [0.0, 0.0, -0.5]]
"#,
    );
    let out = run(&["sweetspot", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 4, "{}", stderr_of(&out));
}

#[test]
fn seed_override_changes_randomized_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
schema_version = 1

[fig2]
n_realizations = 3
points = 2
"#,
    );
    let run_fig2 = |seed: &str, out: &Path| {
        let o = run(&[
            "fig2",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&o), 0, "{}", stderr_of(&o));
        std::fs::read(out.join("fig2.csv")).unwrap()
    };
    let a = run_fig2("5", &dir.path().join("a"));
    let b = run_fig2("6", &dir.path().join("b"));
    let c = run_fig2("5", &dir.path().join("c"));
    assert_ne!(a, b, "different seeds must change the ensemble");
    assert_eq!(a, c, "same seed must reproduce the table byte for byte");
}

#[test]
fn echoed_config_replays_to_the_same_payload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE_BODY);
    let out_a = dir.path().join("a");
    let first = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&first), 0, "{}", stderr_of(&first));
    let envelope: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_a.join("simulate.json")).unwrap()).unwrap();

    // Re-serialize the echoed config as a standalone file and run from it.
    use serde::Deserialize;
    let echoed = toml::Value::deserialize(envelope["config"].clone()).unwrap();
    let replay_cfg = dir.path().join("replay.toml");
    std::fs::write(&replay_cfg, toml::to_string(&echoed).unwrap()).unwrap();
    let out_b = dir.path().join("b");
    let second = run(&[
        "simulate",
        "--config",
        replay_cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&second), 0, "{}", stderr_of(&second));

    let replayed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_b.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(
        envelope["payload"], replayed["payload"],
        "replaying the echoed config must reproduce the payload"
    );
    let csv_a = std::fs::read(out_a.join("simulate.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("simulate.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn fig2_emits_rate_and_shift_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
schema_version = 1

[fig2]
n_realizations = 3
points = 2
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "fig2",
        "--config",
        cfg.to_str().unwrap(),
        "--plot",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    assert!(out_dir.join("fig2.svg").exists());
    assert!(out_dir.join("fig2_shift.svg").exists());
}
