//! End-to-end tests of the `netmpc` binary: output text, JSON reports,
//! exit codes, determinism, and the error paths the executable promises.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn reference_model() -> String {
    format!("{}/../../models/example1.json", env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn netmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netmpc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn netmpc_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netmpc"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("stdout is JSON")
}

fn tmp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("netmpc-test-{}-{name}", std::process::id()))
}

// -----------------------------------------------------------------------
// happy paths
// -----------------------------------------------------------------------

#[test]
fn synthesize_reference_text() {
    let out = netmpc(&["synthesize", "--model", &reference_model()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("p = (19, 8, 2, 6, 5)"), "missing value line:\n{text}");
    assert!(
        text.contains("successors: 1 -> 2, 2 -> 3, 3 -> goal, 4 -> 3, 5 -> 3"),
        "missing successor line:\n{text}"
    );
}

#[test]
fn synthesize_single_vertex() {
    let out = netmpc(&["synthesize", "--model", &fixture("t1.json")]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("p = (2)"), "missing value line:\n{text}");
    assert!(text.contains("1 -> goal"), "missing successor line:\n{text}");
}

#[test]
fn tune_single_vertex_json() {
    let out = netmpc(&["tune", "--model", &fixture("t1.json"), "--json"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = json(&out);
    let gamma = v["gamma_star"].as_f64().unwrap();
    // One vertex, unit cap and box: any scaling costs 1/lambda + 1, so the
    // optimum sits at lambda = 1 with ratio 2 (interior solve lands a hair
    // above it).
    assert!((gamma - 2.0).abs() <= 1e-6, "gamma* = {gamma}");
    assert_eq!(v["horizons"]["minimal_horizon"].as_u64(), Some(3));
}

#[test]
fn certify_rejecting_report_is_not_an_error() {
    // An inadmissible scaling is an answered question, not a failure.
    let out = netmpc(&[
        "certify",
        "--model",
        &reference_model(),
        "--lambda",
        "1,1,1,1,1",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("admissible: no"), "missing verdict:\n{text}");
    assert!(text.contains("exceeds its cap"), "missing violation detail:\n{text}");
}

#[test]
fn value_reports_reference_optimum_and_exports_the_program() {
    let lp = tmp_path("export.lp");
    let out = netmpc(&[
        "value",
        "--model",
        &reference_model(),
        "--x0",
        "xbar",
        "--horizon",
        "4",
        "--export-lp",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("optimal value = 52.5"), "stdout:\n{}", stdout(&out));
    let dump = std::fs::read_to_string(&lp).expect("LP dump written");
    assert!(
        dump.starts_with("# horizon-4 transport program"),
        "unexpected dump head: {:?}",
        dump.lines().next()
    );
    std::fs::remove_file(&lp).ok();
}

#[test]
fn simulate_mpc_reference_json() {
    let out = netmpc(&[
        "simulate",
        "--model",
        &reference_model(),
        "--controller",
        "mpc",
        "--horizon",
        "16",
        "--x0",
        "xbar",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = json(&out);
    let total = v["total_cost"].as_f64().unwrap();
    assert!((total - 56.5).abs() <= 0.1, "total_cost = {total}");
    assert_eq!(v["bound"]["satisfied"].as_bool(), Some(true), "bound: {}", v["bound"]);
}

#[test]
fn simulate_scaled_explicit_lambda_json() {
    let out = netmpc(&[
        "simulate",
        "--model",
        &reference_model(),
        "--controller",
        "scaled",
        "--lambda",
        "0.25,0.25,1.0,0.2876,0.3050",
        "--x0",
        "xbar",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = json(&out);
    let total = v["total_cost"].as_f64().unwrap();
    assert!((total - 111.9885).abs() <= 1e-3, "total_cost = {total}");
    assert_eq!(v["bound"]["satisfied"].as_bool(), Some(true), "bound: {}", v["bound"]);
}

#[test]
fn simulate_from_zero_costs_nothing() {
    let out = netmpc(&[
        "simulate",
        "--model",
        &reference_model(),
        "--controller",
        "mpc",
        "--horizon",
        "12",
        "--x0",
        "zero",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["total_cost"].as_f64(), Some(0.0));
}

#[test]
fn reproduce_passes_every_check() {
    let out = netmpc(&["reproduce"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("13 of 13 checks passed"), "summary line missing:\n{text}");
}

// -----------------------------------------------------------------------
// determinism
// -----------------------------------------------------------------------

#[test]
fn tune_output_is_byte_identical_across_runs() {
    let args = ["tune", "--model", &reference_model(), "--json"];
    let first = netmpc(&args);
    let second = netmpc(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout, "tune output drifted between runs");
}

#[test]
fn simulate_output_and_csv_are_byte_identical_across_runs() {
    let model = reference_model();
    let run = |csv: &PathBuf| {
        netmpc(&[
            "simulate",
            "--model",
            &model,
            "--controller",
            "mpc",
            "--horizon",
            "16",
            "--x0",
            "xbar",
            "--csv",
            csv.to_str().unwrap(),
            "--json",
        ])
    };
    let csv_a = tmp_path("traj-a.csv");
    let csv_b = tmp_path("traj-b.csv");
    let first = run(&csv_a);
    let second = run(&csv_b);
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));
    let bytes_a = std::fs::read(&csv_a).expect("first CSV written");
    let bytes_b = std::fs::read(&csv_b).expect("second CSV written");
    assert_eq!(bytes_a, bytes_b, "trajectory CSV drifted between runs");

    // The JSON differs only in the CSV path it echoes back.
    let normalize = |out: &Output, path: &PathBuf| {
        stdout(out).replace(path.to_str().unwrap(), "<csv>")
    };
    assert_eq!(
        normalize(&first, &csv_a),
        normalize(&second, &csv_b),
        "simulation report drifted between runs"
    );
    std::fs::remove_file(&csv_a).ok();
    std::fs::remove_file(&csv_b).ok();
}

#[test]
fn trajectory_csv_has_the_documented_shape() {
    let csv = tmp_path("traj-shape.csv");
    let out = netmpc(&[
        "simulate",
        "--model",
        &reference_model(),
        "--controller",
        "mpc",
        "--horizon",
        "16",
        "--x0",
        "xbar",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).expect("CSV written");
    let mut lines = text.lines();
    let header = lines.next().expect("header row");
    assert_eq!(
        header,
        "t,x_1,x_2,x_3,x_4,x_5,u_1,u_2,u_3,u_4,u_5,u_6,u_7,u_8,u_9,stage_cost,cumulative_cost,tail"
    );
    let column_count = header.split(',').count();
    let mut last = header;
    for line in lines {
        assert_eq!(line.split(',').count(), column_count, "ragged row: {line}");
        last = line;
    }
    // Final row summarizes the run: cumulative cost and the exact tail.
    let final_fields: Vec<&str> = last.split(',').collect();
    assert!(!final_fields[column_count - 2].is_empty(), "final row lacks the cumulative cost");
    assert!(!final_fields[column_count - 1].is_empty(), "final row lacks the tail");
    std::fs::remove_file(&csv).ok();
}

// -----------------------------------------------------------------------
// exit codes
// -----------------------------------------------------------------------

#[test]
fn tune_without_bounds_is_an_input_error() {
    let out = netmpc(&["tune", "--model", &fixture("nobounds.json")]);
    assert_eq!(code(&out), 2, "stdout: {}", stdout(&out));
    assert!(
        stderr(&out).contains("tuning requires capacity bounds"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn out_of_range_head_is_an_input_error() {
    let out = netmpc(&["synthesize", "--model", &fixture("badvertex.json")]);
    assert_eq!(code(&out), 2, "stdout: {}", stdout(&out));
    assert!(stderr(&out).contains("7 out of range"), "stderr: {}", stderr(&out));
}

#[test]
fn unreachable_vertex_is_an_input_error() {
    let out = netmpc(&["synthesize", "--model", &fixture("unreachable.json")]);
    assert_eq!(code(&out), 2, "stdout: {}", stdout(&out));
    assert!(
        stderr(&out).contains("vertex 2 has no path to the goal"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn inconsistent_controller_flags_are_input_errors() {
    let model = reference_model();
    let cases: &[&[&str]] = &[
        // mpc needs a horizon
        &["simulate", "--model", &model, "--controller", "mpc", "--x0", "xbar"],
        // scaled must not take one
        &["simulate", "--model", &model, "--controller", "scaled", "--horizon", "8", "--x0", "xbar"],
        // mpc must not take a scaling
        &[
            "simulate", "--model", &model, "--controller", "mpc", "--horizon", "8", "--lambda",
            "0.5,0.5,0.5,0.5,0.5", "--x0", "xbar",
        ],
        // unknown controller name
        &["simulate", "--model", &model, "--controller", "bang", "--x0", "xbar"],
    ];
    for args in cases {
        let out = netmpc(args);
        assert_eq!(code(&out), 2, "args {args:?} gave stdout: {}", stdout(&out));
    }
}

#[test]
fn ratio_at_most_one_is_an_input_error() {
    let out = netmpc(&["bound", "--gamma", "0.5"]);
    assert_eq!(code(&out), 2, "stdout: {}", stdout(&out));
}

#[test]
fn tolerance_override_applies_and_garbage_is_rejected() {
    let model = reference_model();
    let args = [
        "simulate",
        "--model",
        &model,
        "--controller",
        "scaled",
        "--lambda",
        "0.25,0.25,1.0,0.2876,0.3050",
        "--x0",
        "xbar",
    ];
    // The accumulated cost matches the certified total to ~1e-8; an absurdly
    // tight tolerance turns that roundoff into a reported guarantee failure.
    let strict = netmpc_env(&args, &[("NETMPC_TOL", "1e-18")]);
    assert_eq!(code(&strict), 1, "stdout: {}", stdout(&strict));
    assert!(
        stderr(&strict).contains("cost guarantee violated"),
        "stderr: {}",
        stderr(&strict)
    );

    let garbage = netmpc_env(&args, &[("NETMPC_TOL", "pretty-loose")]);
    assert_eq!(code(&garbage), 2, "stdout: {}", stdout(&garbage));
}
