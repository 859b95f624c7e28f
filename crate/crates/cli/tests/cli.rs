use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn inputs(dir: &Path) -> Vec<String> {
    let mut args = Vec::new();
    for (flag, file) in [("--schema", "schema.txt"), ("--constraints", "constraints.txt"), ("--data", "facts.txt")] {
        args.push(flag.to_string());
        args.push(dir.join(file).display().to_string());
    }
    args
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullcqa"))
        .args(args)
        .args(inputs(dir))
        .env_remove("NULLCQA_MAX_CANDIDATES")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn write_case(schema: &str, constraints: &str, facts: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("schema.txt"), schema).unwrap();
    std::fs::write(dir.path().join("constraints.txt"), constraints).unwrap();
    std::fs::write(dir.path().join("facts.txt"), facts).unwrap();
    dir
}

#[test]
fn check_consistent_database() {
    let out = run(&["check"], &fixture("inclusion_with_nulls"));
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert_eq!(json["consistent"], true);
    assert_eq!(json["constraints"].as_array().unwrap().len(), 2);
}

#[test]
fn check_reports_violations() {
    let out = run(&["check"], &fixture("key_and_foreign_key"));
    assert_eq!(out.status.code(), Some(1));
    let json = stdout_json(&out);
    assert_eq!(json["consistent"], false);
    assert_eq!(json["constraints"][1]["violations"][0]["v"], "f");
}

#[test]
fn repairs_of_inconsistent_database() {
    let out = run(&["repairs"], &fixture("cyclic_inclusion"));
    assert_eq!(out.status.code(), Some(1));
    let json = stdout_json(&out);
    assert_eq!(json["consistent"], false);
    assert_eq!(json["count"], 4);
    let smallest = json["repairs"].as_array().unwrap().iter().any(|r| r["instance"] == serde_json::json!(["P(null, a)"]));
    assert!(smallest);
}

#[test]
fn contracted_graph_as_dot() {
    let out = run(&["graph", "--contracted", "--dot"], &fixture("dependency_chain"));
    assert_eq!(out.status.code(), Some(0));
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("label=\"{Q,R,S}\""));
    assert!(dot.contains("-> v1 [label=\"ic3\"]"));
}

#[test]
fn graph_analyses_as_json() {
    let out = run(&["graph"], &fixture("cyclic_inclusion"));
    let json = stdout_json(&out);
    assert_eq!(json["ric_acyclic"]["acyclic"], false);
    assert_eq!(json["bilateral"], serde_json::json!(["P", "T"]));
    assert_eq!(json["graph"]["vertices"].as_array().unwrap().len(), 2);
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [&["repairs"][..], &["compile"], &["solve", "--extract"], &["graph", "--text"]] {
        let a = run(args, &fixture("key_and_foreign_key"));
        let b = run(args, &fixture("key_and_foreign_key"));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn compile_writes_program_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("repair.lp");
    let out = run(&["compile", "--annotate-provenance", "-o", path.to_str().unwrap()], &fixture("key_and_foreign_key"));
    assert_eq!(out.status.code(), Some(0));
    let program = std::fs::read_to_string(&path).unwrap();
    assert!(program.contains("% constraint key (uic)\n"));
    assert!(program.contains("r_(X,Y,fa) v r_(X,Z,fa) :- r_(X,Y,ts), r_(X,Z,ts), Y != Z, X != null, Y != null, Z != null."));
    assert_eq!(stdout_json(&out)["facts"], 4);

    // the written program solves to the same databases
    let solved = run(&["solve", "--extract", "--program", path.to_str().unwrap()], &fixture("key_and_foreign_key"));
    assert_eq!(solved.status.code(), Some(0));
    let compiled = run(&["solve", "--extract"], &fixture("key_and_foreign_key"));
    assert_eq!(stdout_json(&solved)["databases"], stdout_json(&compiled)["databases"]);
    assert_eq!(stdout_json(&solved)["count"], 4);
}

#[test]
fn cyclic_constraints_need_opt_in() {
    let out = run(&["compile"], &fixture("cyclic_inclusion"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "cyclic");
    let out = run(&["compile", "--allow-cyclic"], &fixture("cyclic_inclusion"));
    assert_eq!(out.status.code(), Some(0));
    assert!(!stdout_json(&out)["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn unsupported_and_conflicting_sets_exit_3() {
    let out = run(&["compile"], &fixture("join_with_nulls"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "unsupported");

    let case = write_case("P/1: A.\nQ/2: A, B.\n", "P(x) -> exists y: Q(x,y).\nQ(x,y), isnull(y) -> false.\n", "P(a).\n");
    let out = run(&["repairs"], case.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "conflicting");
}

#[test]
fn shift_rejects_head_cycles() {
    let out = run(&["solve", "--shifted"], &fixture("symmetric_closure"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "not_hcf");
    let out = run(&["solve"], &fixture("symmetric_closure"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["hcf"]["hcf"], false);
}

#[test]
fn consistent_answers_by_both_routes() {
    let dir = fixture("key_and_foreign_key");
    let out = run(&["cqa", "--query", "ans(X,Y) <- S(X,Y).", "--route", "both"], &dir);
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert_eq!(json["agree"], true);
    assert_eq!(json["enumeration"]["tuples"], serde_json::json!([[null, "a"]]));

    let out = run(&["cqa", "--query", "ans(X,Y) <- S(X,Y).", "--no-nulls", "--text"], &dir);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "");
    let out = run(&["cqa", "--query", "ans <- S(null,a).", "--route", "program", "--text"], &dir);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "yes\n");
}

#[test]
fn candidate_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_nullcqa"))
        .arg("repairs")
        .args(inputs(&fixture("key_and_foreign_key")))
        .env("NULLCQA_MAX_CANDIDATES", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "cap_exceeded");
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_nullcqa")).args(["check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");

    let out = Command::new(env!("CARGO_BIN_EXE_nullcqa")).args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let case = write_case("R/2: A, B.\n", "R(x,y) -> S(x).\n", "R(a,b).\n");
    let out = run(&["check"], case.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "parse");
    assert_eq!(err["error"]["line"], 1);

    let out = run(&["cqa", "--query", "ans(Z) <- R(X,Y)."], &fixture("key_and_foreign_key"));
    assert_eq!(out.status.code(), Some(2));
}
