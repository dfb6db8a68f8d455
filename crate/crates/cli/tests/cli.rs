//! End-to-end checks of the command-line interface: output contracts,
//! exit codes, determinism.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liouville-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn liouville_log2_exact_output() {
    let out = run(&["liouville", "--box", "-1", "0", "1", "inf"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "0.6931471805599453\n");
}

#[test]
fn liouville_log_four_thirds() {
    let out = run(&["liouville", "--box", "0", "1", "2", "3"]);
    assert!(out.status.success());
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-15);
}

#[test]
fn liouville_degenerate_box_exits_2() {
    let out = run(&["liouville", "--box", "0", "1", "0.5", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn quake_eval_simple_action() {
    let out = run(&[
        "quake-eval",
        "--leaf", "0", "inf", "1",
        "--tau", "0.6931471805599453",
        "--points", "3,-1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("point,image"));
    let row1: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row2: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row1[0], "3");
    assert!((row1[1].parse::<f64>().unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(row2[0], "-1");
    assert_eq!(row2[1], "-1");
}

#[test]
fn quake_eval_identity_at_tau_zero() {
    let out = run(&[
        "quake-eval",
        "--leaf", "1", "2", "0.5",
        "--tau", "0",
        "--points", "0.5,1.5,7",
    ]);
    assert!(out.status.success());
    for (line, x) in stdout(&out).lines().skip(1).take(3).zip(["0.5", "1.5", "7"]) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], x);
        assert_eq!(cols[1], x);
    }
}

#[test]
fn quake_eval_orbit_file_deterministic() {
    let dir = std::env::temp_dir().join("liouville-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("orbit.lam");
    std::fs::write(
        &path,
        "# orbit of z -> 4z acting on (1,2)\n0.25 0.5 1.0\n1 2 1.0\n4 8 1.0 # outermost\n",
    )
    .unwrap();
    let args = [
        "quake-eval",
        "--lamination", path.to_str().unwrap(),
        "--tau", "0.3",
        "--points", "1.5,6,0.3,20",
    ];
    let out1 = run(&args);
    let out2 = run(&args);
    assert!(out1.status.success());
    assert_eq!(stdout(&out1), stdout(&out2), "byte-identical across runs");
}

#[test]
fn d1_regression_passes_threshold() {
    let out = run(&[
        "d1",
        "--leaf", "0", "inf", "1",
        "--support", "1", "3", "-2", "-1",
        "--threshold", "1e-5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("closed_re,closed_im,oracle_re,oracle_im,abs_err,rel_err"));
    let rel: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("rel_err="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rel <= 1e-5);
}

#[test]
fn d1_zero_threshold_exits_1() {
    let out = run(&[
        "d1",
        "--leaf", "0", "inf", "1",
        "--support", "1", "3", "-2", "-1",
        "--threshold", "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn d2_two_leaf_regression() {
    let out = run(&[
        "d2",
        "--leaf", "0", "inf", "0.7",
        "--leaf", "1", "2", "0.4",
        "--support", "1.2", "1.8", "-3", "-1",
        "--threshold", "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn quakebend_extreme_tau_exits_3() {
    let out = run(&[
        "d1-quakebend",
        "--leaf", "0", "inf", "1",
        "--support", "1", "3", "-2", "-1",
        "--tau", "3i",
        "--tol", "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn quakebend_matches_cauchy_oracle() {
    let out = run(&[
        "d1-quakebend",
        "--leaf", "0", "inf", "1",
        "--support", "1", "3", "-2", "-1",
        "--tau", "0.1+0.05i",
        "--tol", "1e-6",
        "--threshold", "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn decay_slope_line_and_empty_family() {
    let out = run(&[
        "decay",
        "--support", "-0.2", "3.5", "-2", "-1",
        "--count", "8",
        "--tol", "5e-9",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("d_g,magnitude"));
    let slope: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("slope="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope <= -1.8, "slope {slope}");

    let out = run(&["decay", "--support", "-0.2", "3.5", "-2", "-1", "--count", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kj_constant_tail_rows() {
    let out = run(&[
        "kj",
        "--leaf", "1", "2", "1",
        "--support", "1.2", "1.8", "-2", "-1",
        "--tau", "0.05",
        "--radii", "0.5,2.5,3.5,5",
        "--tol", "1e-7",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    // saturated: every row with r ≥ 2.5 is identical
    assert_eq!(rows[1][1], rows[2][1]);
    assert_eq!(rows[2][1], rows[3][1]);
    // the truncation at r = 0.5 is empty, value 0
    assert_eq!(rows[0][1], 0.0);
}

#[test]
fn json_embeds_config() {
    let out = run(&[
        "thurston-estimate",
        "--leaf", "1", "2", "1",
        "--samples", "50",
        "--seed", "7",
        "--format", "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["config"]["command"], "thurston-estimate");
    assert_eq!(doc["config"]["samples"], 50);
    assert_eq!(doc["config"]["common"]["seed"], 7);
    assert!(doc["rows"].as_array().unwrap().len() == 1);
    assert!(doc["summary"]["lower_bound"].as_f64().unwrap() >= 1.0 - 1e-12);
}

#[test]
fn crossing_leaves_rejected_exit_2() {
    let out = run(&[
        "thurston-estimate",
        "--leaf", "0", "inf", "1",
        "--leaf", "-1", "1", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mixed_lamination_sources_rejected() {
    let out = run(&[
        "quake-eval",
        "--leaf", "1", "2", "1",
        "--orbit", "2 0 0 0.5 / 1 2 / 1 / 3",
        "--points", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn orbit_source_inline() {
    let out = run(&[
        "quake-eval",
        "--orbit", "2 0 0 0.5 / 1 2 / 1 / 1",
        "--tau", "0",
        "--points", "1.5",
        "--format", "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["summary"]["leaves"], 3);
}
