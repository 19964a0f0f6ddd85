//! End-to-end checks of the binary: exit-code contract, byte-identical
//! traces for identical invocations, and config-file round-tripping.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gae(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gae"))
        .args(args)
        .current_dir(dir)
        .env_remove("GAE_SEED")
        .output()
        .expect("failed to spawn gae")
}

#[test]
fn run_constant_exits_zero_with_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &["run", "--problem", "constant", "--eps", "0.1", "--sigma", "0.1", "--seed", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("outer_iterations = 1"), "stdout: {stdout}");
    assert!(stdout.contains("i_star = 1"));
}

#[test]
fn identical_runs_produce_identical_trace_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |trace: &str| {
        vec![
            "run".to_string(),
            "--problem".into(),
            "fig4".into(),
            "--eps".into(),
            "0.05".into(),
            "--sigma".into(),
            "0.05".into(),
            "--seed".into(),
            "3".into(),
            "--trace".into(),
            trace.to_string(),
        ]
    };
    for trace in ["a.jsonl", "b.jsonl"] {
        let argv = args(trace);
        let argv: Vec<&str> = argv.iter().map(|s| s.as_str()).collect();
        let out = gae(&argv, dir.path());
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "trace files differ between identical runs");
}

#[test]
fn run_summary_lands_near_a_caption_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &[
            "run", "--problem", "fig4", "--eps", "0.05", "--sigma", "0.05", "--seed", "3",
            "--summary", "s.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let y_line = stdout.lines().find(|l| l.starts_with("y_star")).unwrap();
    let y: f64 = y_line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!((y - 2.0).abs() < 0.25 || (y + 2.0).abs() < 0.25, "y_star = {y}");
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "expected header plus one row");
}

#[test]
fn config_file_round_trips_through_save_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("in.cfg");
    fs::write(
        &cfg_path,
        "problem = quad_scsc\neps = 0.05\nsigma = 0.05\nseed = 7\nparam.alpha = 2\n",
    )
    .unwrap();
    let out = gae(
        &["run", "--config", "in.cfg", "--save-config", "out.cfg"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let saved = fs::read_to_string(dir.path().join("out.cfg")).unwrap();
    assert!(saved.contains("problem = quad_scsc"));
    assert!(saved.contains("param.alpha = 2"));
    // feeding the saved config back reproduces the exact trace
    for (cfg, trace) in [("in.cfg", "t1.jsonl"), ("out.cfg", "t2.jsonl")] {
        let out = gae(&["run", "--config", cfg, "--trace", trace], dir.path());
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(dir.path().join("t1.jsonl")).unwrap(),
        fs::read(dir.path().join("t2.jsonl")).unwrap()
    );
}

#[test]
fn unknown_problem_is_a_validation_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(&["run", "--problem", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_flag_value_is_a_validation_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &["run", "--problem", "constant", "--eps", "0.1", "--sigma", "wide"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gap_prints_the_analytic_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &["gap", "--problem", "quad_scsc", "--x", "0.1", "--y", "0.1"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v - 0.02).abs() < 1e-12);
}

#[test]
fn gap_without_best_responses_is_a_capability_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(&["gap", "--problem", "ex22", "--x", "0", "--y", "0"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn certify_solver_output_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &[
            "run", "--problem", "quad_scsc", "--eps", "0.05", "--sigma", "0.05", "--seed", "9",
            "--trace", "q.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = gae(
        &["certify", "--trace", "q.jsonl", "--mc-samples", "20000", "--seed", "4"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict = pass"));
}

#[test]
fn certify_a_saddle_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // y = pi is a minimum of cos, not a maximum: the y-side check fails
    let out = gae(
        &[
            "certify", "--problem", "cosine1d", "--x", "0", "--y", "3.14159265",
            "--eps", "0.01", "--sigma", "0.1", "--mc-samples", "1000",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "stdout: {}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn params_prints_the_full_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &[
            "params", "--preset", "theoretical", "--eps", "0.1", "--sigma", "0.1", "--b", "1",
            "--L", "1", "--d", "2",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for key in [
        "gamma1", "delta", "mu1", "mu3", "mu4", "eta", "alpha", "I2", "I3", "I4", "eps0",
        "omega", "L1", "L2",
    ] {
        assert!(stdout.contains(&format!("{key} = ")), "missing {key} in ledger");
    }
}

#[test]
fn path_reports_a_valid_greedy_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &[
            "path", "--problem", "ex22", "--x", "0", "--y0", "-1.5", "--eps", "0.01",
            "--trace", "p.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("valid = true"));
    let f_end: f64 = stdout
        .lines()
        .find(|l| l.starts_with("f_end"))
        .and_then(|l| l.split('=').nth(1))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((f_end + 1.0).abs() < 1e-2, "f_end = {f_end}");
    let first = fs::read_to_string(dir.path().join("p.jsonl")).unwrap();
    let first = first.lines().next().unwrap();
    for field in ["kind", "from", "to", "f_before", "f_after"] {
        assert!(first.contains(field), "path line missing `{field}`: {first}");
    }
}

#[test]
fn path_at_a_maximum_takes_zero_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = gae(
        &["path", "--problem", "concquad", "--x", "0", "--y0", "0", "--eps", "0.01"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("steps = 0"));
}

#[test]
fn env_seed_is_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gae"))
        .args(["run", "--problem", "constant", "--eps", "0.1", "--sigma", "0.1", "--trace", "e1.jsonl"])
        .current_dir(dir.path())
        .env("GAE_SEED", "12345")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("e1.jsonl")).unwrap();
    assert!(text.lines().next().unwrap().contains("\"seed\":12345"));
}
