//! End-to-end checks of the command-line interface: flag handling, exit
//! codes, artifact layout, and reproducibility from a manifest.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nlogb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlogb"))
        .args(args)
        .output()
        .expect("spawning the binary")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "expected exit {code}\nstdout: {}\nstderr: {}",
        stdout_of(output),
        stderr_of(output)
    );
}

#[test]
fn run_writes_all_four_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let output = nlogb(&[
        "run",
        "--alpha",
        "0.4",
        "--steps",
        "120",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    for name in [
        "distribution.csv",
        "density_grid.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["steps"], 120);
    assert_eq!(summary["config"]["phase"]["rule"], "kerr");
    assert_eq!(summary["config"]["phase"]["alpha"], 0.4);
}

#[test]
fn run_defaults_are_a_300_step_linear_symmetric_walk() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let output = nlogb(&["run", "--out", out.to_str().unwrap()]);
    assert_exit(&output, 0);
    let text = stdout_of(&output);
    assert!(text.contains("alpha = 0"), "stdout: {text}");
    assert!(text.contains("steps = 300"), "stdout: {text}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["steps"], 300);
    assert_eq!(summary["config"]["init"]["kind"], "symmetric_delta");
    assert_eq!(summary["phase"], "I");
}

#[test]
fn unknown_flags_exit_2() {
    let output = nlogb(&["run", "--bogus"]);
    assert_exit(&output, 2);
}

#[test]
fn malformed_values_exit_2() {
    for args in [
        ["run", "--steps", "many"].as_slice(),
        ["run", "--record-every", "0"].as_slice(),
        ["run", "--dm", "0"].as_slice(),
        ["run", "--phase", "cubic"].as_slice(),
    ] {
        let output = nlogb(args);
        assert_exit(&output, 2);
    }
}

#[test]
fn invalid_custom_state_exits_1() {
    let dir = TempDir::new().unwrap();
    let init = dir.path().join("init.csv");
    fs::write(&init, "0,1,0,1,0\n").unwrap();
    let output = nlogb(&[
        "run",
        "--init",
        init.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&output, 1);
    assert!(stderr_of(&output).contains("probability"));
}

#[test]
fn custom_state_file_runs() {
    let dir = TempDir::new().unwrap();
    let init = dir.path().join("init.csv");
    // (1, i)/sqrt(2) at the origin, written out by hand.
    fs::write(
        &init,
        "# m,re_u,im_u,re_d,im_d\n0,0.7071067811865476,0,0,0.7071067811865476\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = nlogb(&[
        "run",
        "--alpha",
        "0.2",
        "--steps",
        "100",
        "--init",
        init.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["init"]["kind"], "custom");
}

#[test]
fn rerun_from_manifest_reproduces_every_artifact_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let output = nlogb(&[
        "run",
        "--alpha",
        "0.49",
        "--steps",
        "400",
        "--dm",
        "6",
        "--record-every",
        "25",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let output = nlogb(&[
        "run",
        "--from-manifest",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    // The manifest itself records wall-clock time, which legitimately
    // differs; every data artifact must match exactly.
    for name in ["distribution.csv", "density_grid.csv", "summary.json"] {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between original and manifest re-run");
    }
}

#[test]
fn out_dir_falls_back_to_the_environment_variable() {
    let dir = TempDir::new().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_nlogb"))
        .args(["run", "--alpha", "0.1", "--steps", "60"])
        .env("NLOGB_OUT_DIR", dir.path())
        .output()
        .expect("spawning the binary");
    assert_exit(&output, 0);
    assert!(dir.path().join("summary.json").is_file());
}

fn read_index(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn sweep_writes_per_point_summaries_and_a_sorted_index() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let output = nlogb(&[
        "sweep",
        "--alpha-from",
        "0.1",
        "--alpha-to",
        "0.3",
        "--alpha-step",
        "0.1",
        "--steps",
        "300",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let lines = read_index(&out.join("sweep_index.csv"));
    assert_eq!(lines[1], "alpha,t_col,phase");
    assert_eq!(lines.len(), 5, "expected 3 data rows: {lines:?}");
    let alphas: Vec<&str> = lines[2..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(alphas, ["0.1", "0.2", "0.3"]);
    for alpha in ["0.1", "0.2", "0.3"] {
        let point = out.join(format!("alpha_{alpha}"));
        assert!(point.join("summary.json").is_file());
        assert!(point.join("manifest.json").is_file());
    }
}

#[test]
fn single_point_sweep_matches_the_equivalent_run() {
    let dir = TempDir::new().unwrap();
    let sweep_out = dir.path().join("sweep");
    let run_out = dir.path().join("run");
    let output = nlogb(&[
        "sweep",
        "--alpha-from",
        "0.4",
        "--alpha-to",
        "0.4",
        "--alpha-step",
        "0.01",
        "--steps",
        "300",
        "--out",
        sweep_out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let output = nlogb(&[
        "run",
        "--alpha",
        "0.4",
        "--steps",
        "300",
        "--record-every",
        "1",
        "--out",
        run_out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let a = fs::read(sweep_out.join("alpha_0.4").join("summary.json")).unwrap();
    let b = fs::read(run_out.join("summary.json")).unwrap();
    assert_eq!(a, b, "sweep point summary differs from the run summary");
}

#[test]
fn empty_sweep_range_exits_2() {
    let dir = TempDir::new().unwrap();
    let output = nlogb(&[
        "sweep",
        "--alpha-from",
        "0.5",
        "--alpha-to",
        "0.4",
        "--alpha-step",
        "0.01",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    let output = nlogb(&[
        "sweep",
        "--alpha-from",
        "0.4",
        "--alpha-to",
        "0.5",
        "--alpha-step",
        "-0.01",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn fit_needs_at_least_three_collision_points() {
    let dir = TempDir::new().unwrap();
    let index = dir.path().join("sweep_index.csv");
    fs::write(
        &index,
        "# nlogb-sweep-index/1\nalpha,t_col,phase\n0.5,291,II\n0.52,186,II\n0.3,,I\n",
    )
    .unwrap();
    let output = nlogb(&["fit", "--index", index.to_str().unwrap()]);
    assert_exit(&output, 1);
    assert!(stderr_of(&output).contains("at least 3"));
}

#[test]
fn fit_reports_the_hyperbola_coefficients() {
    let dir = TempDir::new().unwrap();
    let index = dir.path().join("sweep_index.csv");
    // Exact 1/t_col = -0.034/alpha + 0.0715 data, rounded to integers.
    fs::write(
        &index,
        "# nlogb-sweep-index/1\nalpha,t_col,phase\n0.5,291,II\n0.52,186,II\n0.54,125,II\n0.56,98,II\n",
    )
    .unwrap();
    let output = nlogb(&["fit", "--index", index.to_str().unwrap()]);
    assert_exit(&output, 0);
    let text = stdout_of(&output);
    assert!(text.contains("a = "), "stdout: {text}");
    assert!(text.contains("alpha_I = 0.4"), "stdout: {text}");
    assert!(dir.path().join("fit_report.txt").is_file());
}

#[test]
fn classify_prints_the_phase_with_evidence() {
    let output = nlogb(&["classify", "--alpha", "0.3", "--steps", "1000"]);
    assert_exit(&output, 0);
    let text = stdout_of(&output);
    assert!(text.contains("phase = I"), "stdout: {text}");
    assert!(text.contains("turning point: none"), "stdout: {text}");
}

#[test]
fn classify_flags_indeterminate_runs_with_exit_3() {
    let output = nlogb(&["classify", "--alpha", "0.3", "--steps", "60"]);
    assert_exit(&output, 3);
    assert!(stdout_of(&output).contains("indeterminate"));
}

#[test]
fn classify_warns_on_short_runs_near_a_boundary() {
    let output = nlogb(&["classify", "--alpha", "0.49", "--steps", "500"]);
    let text = stderr_of(&output);
    assert!(text.contains("warning"), "stderr: {text}");
    assert!(text.contains("1000"), "stderr: {text}");
}

#[test]
fn classify_reads_back_a_run_directory() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let output = nlogb(&[
        "run",
        "--alpha",
        "0.49",
        "--steps",
        "1100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let output = nlogb(&["classify", "--dir", out.to_str().unwrap()]);
    assert_exit(&output, 0);
    let text = stdout_of(&output);
    assert!(text.contains("phase = II"), "stdout: {text}");
    assert!(text.contains("t_col = 521"), "stdout: {text}");
}

#[test]
fn classify_requires_a_target() {
    let output = nlogb(&["classify"]);
    assert_exit(&output, 2);
}
