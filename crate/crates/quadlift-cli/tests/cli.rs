use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadlift")).args(args).env_remove("QUADLIFT_WORKERS").output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_quadlift"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn quadratize_text_block() {
    let o = run(&["quadratize", &fixture("cubic_pair.ode")]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("Introduced variables:\nw0 = x1**2\nw1 = x2**2\n"), "{s}");
    assert!(s.contains("x1' = x1*w0 + w1"), "{s}");
}

#[test]
fn quadratize_json_fields() {
    let o = run(&["quadratize", &fixture("cubic_pair.ode"), "--emit", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["order"], 2);
    assert_eq!(v["optimal"], true);
    assert_eq!(v["mode"], "autonomous");
    assert!(v["nodes_visited"].as_u64().unwrap() > 0);
    assert!(v["wall_time_ms"].is_u64());
    assert_eq!(v["introduced"][1]["definition"], "x2**2");
}

#[test]
fn quadratize_operators() {
    let o = run(&["quadratize", &fixture("shifted_cube.ode"), "--emit", "operators"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["H"]["indexing"], "compact-upper");
    assert_eq!(v["A"].as_array().unwrap().len(), 3);
    assert_eq!(v["order"], 1);
}

#[test]
fn stdin_input() {
    let o = run_stdin(&["quadratize", "-"], "states: x\nx' = x^3;");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("w0 = x**2"));
}

#[test]
fn with_inputs_default_and_input_free_flag() {
    let o = run(&["quadratize", &fixture("input_product.ode")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("w0 = x*u"), "{}", stdout(&o));
    let o = run(&["quadratize", &fixture("duffing.ode"), "--input-free", "--emit", "json"]);
    assert_eq!(json(&o)["mode"], "input-free");
    assert!(!stdout(&o).contains("u'"));
}

#[test]
fn not_found_exit_code() {
    let o = run(&["quadratize", "--input-free", "--max-order", "6", &fixture("square_times_input.ode")]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn timeout_exit_code() {
    let o = run_stdin(
        &["quadratize", "-", "--timeout", "0.001", "--max-order", "30"],
        "states: x, y, z\nx' = x^4*y^3*z^2 + y^4;\ny' = x^3*z^4 + z^3*y;\nz' = x^4*y^4*z^3 + x;",
    );
    match o.status.code() {
        Some(3) => {}
        Some(0) => assert!(stdout(&o).contains("optimality not guaranteed"), "{}", stdout(&o)),
        other => panic!("exit {other:?}: {}", String::from_utf8_lossy(&o.stderr)),
    }
}

#[test]
fn parse_error_exit_code() {
    let o = run_stdin(&["quadratize", "-"], "states: x\nx' = ;");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:6"));
    assert_eq!(run(&["quadratize", "/nonexistent.ode"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn polynomialize_command() {
    let o = run(&["polynomialize", &fixture("exp_sum.ode")]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("w0 = exp(-x)"), "{s}");
    assert!(s.contains("x' = w0**2 + w0"), "{s}");
    let o = run(&["polynomialize", &fixture("combustion.ode"), "--emit", "json"]);
    assert_eq!(json(&o)["order"], 3);
    assert_eq!(run(&["polynomialize", &fixture("combustion.ode"), "--budget", "2"]).status.code(), Some(2));
}

#[test]
fn quadratize_polynomializes_first() {
    let o = run(&["quadratize", &fixture("combustion.ode"), "--max-order", "10", "--emit", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["order"], 7);
    assert_eq!(v["polynomialization"].as_array().unwrap().len(), 3);
}

#[test]
fn agnostic_with_specialization() {
    let o = run(&["agnostic", &fixture("traffic.ode"), "--specialize", &fixture("traffic_d.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("(w1): [x**2]"), "{s}");
    assert!(s.contains("(w2): [x*x~]"), "{s}");
    assert!(s.contains("verified: true"), "{s}");
    let o = run(&["agnostic", &fixture("solar_wind.ode"), "--specialize", &fixture("cyclic_5.json"), "--emit", "json"]);
    let v = json(&o);
    assert_eq!(v["verified"], true);
    assert_eq!(v["specialization"]["introduced"].as_array().unwrap().len(), 20);
    assert_eq!(run(&["agnostic", &fixture("cubic_pair.ode")]).status.code(), Some(1));
}

#[test]
fn verify_command() {
    let ok = run(&["verify", &fixture("duffing.ode"), &fixture("duffing_w.txt"), "--input-free"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("quadratization: yes"));
    let bad = run(&["verify", &fixture("duffing.ode"), &fixture("duffing_bad.txt"), "--input-free"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_check_command() {
    let o = run(&[
        "simulate-check",
        &fixture("duffing.ode"),
        "--input-free",
        "--x0",
        "0.1,0.2",
        "--T",
        "5",
        "--steps",
        "1000",
        "--params",
        "alpha=1,delta=0.1,beta=1",
        "--u",
        "sin(t)",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let dev: f64 = s.rsplit("max relative deviation: ").next().unwrap().trim().parse().unwrap();
    assert!(dev < 1e-6);
}

#[test]
fn workers_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_quadlift"))
        .args(["quadratize", &fixture("sextic.ode"), "--emit", "json"])
        .env("QUADLIFT_WORKERS", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["order"], 3);
}
