//! End-to-end tests of the command-line interface: exit codes, JSON shape,
//! determinism, and the generate-then-check round trip.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tickforge"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tickforge-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_corpus() -> PathBuf {
    let dir = tmp("corpus");
    let out = bin()
        .args(["gen", "corpus", "-o"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("not JSON: {e}\n{}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn validate_reports_bounds_for_the_default_drone() {
    let path = tmp("drone_default.tmsr");
    let out = bin()
        .args(["gen", "drone", "-o"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["progressing"], serde_json::json!(true));
    assert_eq!(v["balanced"], serde_json::json!(true));
    assert_eq!(v["dmax"], serde_json::json!(1)); // default build has age bound 1
    assert!(v["lsigma_bound"].as_str().unwrap().len() > 10);
}

#[test]
fn recoverability_failure_exits_one_with_counterexample() {
    let dir = write_corpus();
    let out = bin()
        .arg("check")
        .arg(dir.join("Tdoubleprime.tmsr"))
        .args(["--property", "v"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["holds"], serde_json::json!(false));
    assert_eq!(
        v["counterexample_kind"],
        serde_json::json!("point-of-no-return-reached")
    );
    assert!(v["counterexample"].is_array());
}

#[test]
fn zero_tick_realizability_on_quiet_spec_exits_zero() {
    let path = tmp("quiet.tmsr");
    fs::write(&path, "pred A;\ninit { Time@0, A@0 }\n").unwrap();
    let out = bin()
        .arg("check")
        .arg(&path)
        .args(["--property", "z", "--ticks", "0"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn parse_errors_exit_two() {
    let path = tmp("broken.tmsr");
    fs::write(&path, "rule r: -> ;\n").unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not parse"));
}

#[test]
fn budget_exhaustion_exits_three() {
    let dir = write_corpus();
    let out = bin()
        .arg("check")
        .arg(dir.join("drone_2x2.tmsr"))
        .args(["--property", "z"])
        .env("TICKFORGE_NODE_BUDGET", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["resource_exhausted"], serde_json::json!(true));
}

#[test]
fn verdict_json_is_deterministic_apart_from_timing() {
    let dir = write_corpus();
    let mut runs = Vec::new();
    for i in 0..2 {
        let json_path = tmp(&format!("verdict{i}.json"));
        let out = bin()
            .arg("check")
            .arg(dir.join("L_not_S_pts.tmsr"))
            .args(["--property", "s", "--json"])
            .arg(&json_path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1));
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("elapsed_ms");
        runs.push(v);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn dot_export_marks_the_graph() {
    let dir = write_corpus();
    let dot_path = tmp("graph.dot");
    let out = bin()
        .arg("check")
        .arg(dir.join("Tprime.tmsr"))
        .args(["--property", "z", "--dot"])
        .arg(&dot_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let dot = fs::read_to_string(&dot_path).unwrap();
    assert!(dot.starts_with("digraph delta {"));
    assert!(dot.contains("tick"));
    assert!(dot.contains("[Time |1| C]"));
}

#[test]
fn sat_generation_round_trips_through_check() {
    // satisfiable formula: bounded realizability holds at 2 ticks
    let sat_path = tmp("sat.tmsr");
    let out = bin()
        .args(["gen", "sat", "--cnf", "1,1,1", "-o"])
        .arg(&sat_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .arg("check")
        .arg(&sat_path)
        .args(["--property", "z", "--ticks", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    // unsatisfiable formula: it fails
    let unsat_path = tmp("unsat.tmsr");
    let out = bin()
        .args(["gen", "sat", "--cnf", "1,1,1;-1,-1,-1", "-o"])
        .arg(&unsat_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .arg("check")
        .arg(&unsat_path)
        .args(["--property", "z", "--ticks", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trace_command_emits_text_and_json() {
    let dir = write_corpus();
    let json_path = tmp("trace.json");
    let out = bin()
        .arg("trace")
        .arg(dir.join("Tprime.tmsr"))
        .args(["--steps", "4", "--policy", "prefer:mk_d", "--json"])
        .arg(&json_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("init {Time@0, C@1}"));
    assert!(text.contains("1 mk_d"));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(v["steps"].as_array().unwrap().len(), 4);
}

#[test]
fn oracle_command_agrees_with_checker_on_corpus_entry() {
    let dir = write_corpus();
    // reliability fails on the Zeno system for both engines
    let check = bin()
        .arg("check")
        .arg(dir.join("Tprime.tmsr"))
        .args(["--property", "l"])
        .output()
        .unwrap();
    let oracle = bin()
        .arg("oracle")
        .arg(dir.join("Tprime.tmsr"))
        .args(["--property", "l"])
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(1));
    assert_eq!(oracle.status.code(), Some(1));
}

#[test]
fn bounded_oracle_matches_bounded_check_on_sat_instance() {
    let sat_path = tmp("sat_b.tmsr");
    let out = bin()
        .args(["gen", "sat", "--cnf", "1,-1,1", "-o"]) // tautological clause
        .arg(&sat_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    for engine in ["check", "oracle"] {
        let arg = if engine == "check" {
            "--ticks"
        } else {
            "--horizon"
        };
        let out = bin()
            .arg(engine)
            .arg(&sat_path)
            .args(["--property", "z", arg, "2"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{engine} disagrees");
    }
}

#[test]
fn bounded_recoverability_is_a_usage_error() {
    let dir = write_corpus();
    let out = bin()
        .arg("check")
        .arg(dir.join("Tprime.tmsr"))
        .args(["--property", "v", "--ticks", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
