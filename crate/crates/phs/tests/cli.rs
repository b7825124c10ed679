//! End-to-end checks of the `phs` binary: exit codes, produced files, and
//! override handling.

use std::path::Path;
use std::process::{Command, Output};

fn phs(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phs"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn fixture() -> String {
    format!(
        "{}/examples/griewank.toml",
        env!("CARGO_MANIFEST_DIR")
    )
}

#[test]
fn run_griewank_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = phs(
        &["run", "-c", &fixture(), "-o", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("best: set_index="), "{stdout}");

    let trials = std::fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 31, "header + 30 rows");
    let sidecar = std::fs::read_to_string(out_dir.join("experiment.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(json["completed"], serde_json::Value::Bool(true));
    assert_eq!(json["seed"], serde_json::json!(7));
}

#[test]
fn run_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = phs(
        &[
            "run",
            "-c",
            &fixture(),
            "--workers",
            "1",
            "--seed",
            "123",
            "-o",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let sidecar = std::fs::read_to_string(out_dir.join("experiment.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(json["workers"], serde_json::json!(1));
    assert_eq!(json["seed"], serde_json::json!(123));
}

#[test]
fn invalid_config_exits_one_without_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    std::fs::write(&config_path, "definitely_not_a_key = true\n").unwrap();
    let out_dir = dir.path().join("should_not_exist");
    let out = phs(
        &[
            "run",
            "-c",
            config_path.to_str().unwrap(),
            "-o",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists(), "no output directory on config error");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("definitely_not_a_key"), "{stderr}");
}

#[test]
fn all_failed_trials_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("fail.toml");
    std::fs::write(
        &config_path,
        r#"
seed = 1
output_dir = "out"

[[parameter]]
name = "x"
kind = "continuous"
low = 0.0
high = 1.0

[plan]
n_random = 3

[target]
kind = "subprocess"
command = "false"
"#,
    )
    .unwrap();
    let out = phs(&["run", "-c", config_path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // Records and the completeness marker still land on disk.
    let trials = std::fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 4);
}

#[test]
fn report_emits_all_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let run = phs(
        &["run", "-c", &fixture(), "-o", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert!(run.status.success());

    let report = phs(&["report", out_dir.to_str().unwrap()], dir.path());
    assert!(
        report.status.success(),
        "{}",
        String::from_utf8_lossy(&report.stderr)
    );
    for name in [
        "fig_result_over_index.svg",
        "fig_scatter_x_y.svg",
        "fig_parallel_coords.svg",
        "fig_worker_timeline.svg",
        "fig_contour_x_y.svg",
    ] {
        assert!(
            out_dir.join("figures").join(name).exists(),
            "missing {name}"
        );
    }
    let stdout = String::from_utf8_lossy(&report.stdout);
    assert!(stdout.contains("best trial"), "{stdout}");
}

#[test]
fn report_figure_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    phs(
        &[
            "run",
            "-c",
            &fixture(),
            "--workers",
            "1",
            "-o",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    let report = phs(
        &[
            "report",
            out_dir.to_str().unwrap(),
            "--fig",
            "contour",
            "--x",
            "x",
            "--y",
            "y",
        ],
        dir.path(),
    );
    assert!(report.status.success());
    let figures: Vec<String> = std::fs::read_dir(out_dir.join("figures"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(figures.len(), 2, "{figures:?}"); // contour svg + csv
    assert!(figures.iter().all(|f| f.starts_with("fig_contour_x_y")));
}

#[test]
fn report_missing_store_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = phs(&["report", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("experiment.json"), "{stderr}");
}

#[test]
fn report_warns_on_partial_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let run = phs(
        &["run", "-c", &fixture(), "-o", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert!(run.status.success());
    // Flip the marker off to simulate an interrupted run.
    let sidecar_path = out_dir.join("experiment.json");
    let text = std::fs::read_to_string(&sidecar_path).unwrap();
    std::fs::write(&sidecar_path, text.replace("\"completed\": true", "\"completed\": false"))
        .unwrap();

    let report = phs(&["report", out_dir.to_str().unwrap()], dir.path());
    assert!(report.status.success());
    let stderr = String::from_utf8_lossy(&report.stderr);
    assert!(stderr.contains("incomplete"), "{stderr}");
}

#[test]
fn list_targets_names_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let out = phs(&["list-targets"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["griewank", "sphere", "rosenbrock", "sleep_then_quadratic"] {
        assert!(stdout.contains(name), "{stdout}");
    }
    assert!(stdout.contains("PHS_PARAM_"), "{stdout}");
}

#[test]
fn replay_from_archived_config_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    for out_dir in [&first, &second] {
        let out = phs(
            &[
                "run",
                "-c",
                &fixture(),
                "--workers",
                "1",
                "-o",
                out_dir.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    // Same seed, serial: everything except wall-clock timestamps matches.
    let strip = |text: &str| -> Vec<String> {
        text.lines()
            .map(|line| {
                let mut cols: Vec<&str> = line.split(',').collect();
                if cols.len() > 6 {
                    cols[5] = "-";
                    cols[6] = "-";
                }
                cols.join(",")
            })
            .collect()
    };
    let a = strip(&std::fs::read_to_string(first.join("trials.csv")).unwrap());
    let b = strip(&std::fs::read_to_string(second.join("trials.csv")).unwrap());
    assert_eq!(a, b);
}
