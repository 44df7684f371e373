use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

fn file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn dyaci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyaci"))
        .args(args)
        .output()
        .unwrap()
}

fn run_on(text: &str, args: &[&str]) -> (i32, String) {
    let f = file(text);
    let mut all = args.to_vec();
    all.push(f.path().to_str().unwrap());
    let out = dyaci(&all);
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn json_lines(stdout: &str) -> Vec<Value> {
    stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn normalize_examples() {
    let text = "{a . {b . a . pair(a,b)} . pair({b.b}, a)}\n{c . b . a}\npair(a, {b})\n";
    let (code, out) = run_on(text, &["normalize", "--format", "json"]);
    assert_eq!(code, 0);
    let rows = json_lines(&out);
    let terms: Vec<&str> = rows.iter().map(|r| r["term"].as_str().unwrap()).collect();
    assert_eq!(
        terms,
        [
            "{a . b . pair(a, b) . pair(b, a)}",
            "{a . b . c}",
            "pair(a, b)"
        ]
    );
    assert_eq!(rows[0]["dag_size"], 5);
}

#[test]
fn normalize_rejects_garbage() {
    assert_eq!(run_on("pair(a,\n", &["normalize"]).0, 2);
    assert_eq!(run_on("{a . b}\n", &["normalize", "--strict"]).0, 0);
    assert_eq!(run_on("{b . a}\n", &["normalize", "--strict"]).0, 2);
    assert_eq!(run_on("{a . b}\n", &["--theory", "dy", "normalize"]).0, 2);
}

#[test]
fn derive_exit_codes() {
    assert_eq!(
        run_on("senc({a . b . c}, a), pair(c, a) |> b\n", &["derive"]).0,
        0
    );
    assert_eq!(run_on("senc(a, b) |> a\n", &["derive"]).0, 1);
    assert_eq!(run_on("senc(X, b) |> a\n", &["derive"]).0, 2);
    assert_eq!(run_on("{a . b} |> a\n", &["derive", "--theory", "dy"]).0, 2);
    let (code, out) = run_on("pair(a, b) |> {a . b}\n", &["derive", "--format", "json"]);
    assert_eq!(code, 0);
    assert_eq!(json_lines(&out)[0]["status"], "derivable");
}

#[test]
fn solve_general_system() {
    let text = "senc(X, a), pair(c, a) |> b\n{X . c} |> a\n";
    let (code, out) = run_on(text, &["solve", "--format", "json"]);
    assert_eq!(code, 0);
    let row = &json_lines(&out)[0];
    assert_eq!(row["status"], "sat");
    let x = dyaci::parse_term(row["model"]["X"].as_str().unwrap()).unwrap();
    let sigma: dyaci::Substitution = [("X".into(), x)].into_iter().collect();
    let system = dyaci::ConstraintSystem::parse(text).unwrap();
    assert!(dyaci::verify_certificate(&system, &sigma, true).unwrap());
    assert!(row["stats"]["nodes"].as_u64().unwrap() > 0);
}

#[test]
fn solve_standard_system_in_plain_theory() {
    let text = "senc(X, a), pair(c, a) |> b\npair(X, c) |> a\n";
    let (code, out) = run_on(text, &["solve", "--theory", "dy", "--format", "json"]);
    assert_eq!(code, 0);
    let row = &json_lines(&out)[0];
    let x = dyaci::parse_term(row["model"]["X"].as_str().unwrap()).unwrap();
    assert!(!x.has_aci());
    let sigma: dyaci::Substitution = [("X".into(), x)].into_iter().collect();
    let system = dyaci::ConstraintSystem::parse(text).unwrap();
    assert!(dyaci::check_model(&system, &sigma, dyaci::Theory::Dy).unwrap());
    assert_eq!(run_on("{X . c} |> a\n", &["solve", "--theory", "dy"]).0, 2);
}

#[test]
fn solve_unsat_and_budget() {
    let (code, out) = run_on("a |> b\n", &["solve"]);
    assert_eq!((code, out.trim()), (1, "UNSAT"));
    let text = "senc(X, a), pair(c, a) |> b\n{X . c} |> a\n";
    assert_eq!(run_on(text, &["solve", "--max-nodes", "1"]).0, 3);
    assert_eq!(run_on(text, &["solve", "--max-nodes", "0"]).0, 2);
    assert_eq!(run_on("X |> \n", &["solve"]).0, 2);
}

#[test]
fn exit_codes_are_stable() {
    let text = "a |> X\nX, senc(s, k) |> s\n";
    let first = run_on(text, &["solve", "--format", "json"]);
    for _ in 0..3 {
        assert_eq!(run_on(text, &["solve", "--format", "json"]), first);
    }
}

#[test]
fn attack_eshop() {
    let out = dyaci(&["attack", "--scenario", "eshop", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json_lines(&String::from_utf8(out.stdout).unwrap())[0];
    assert_eq!(row["status"], "attack");
    assert_eq!(row["model"]["DItemID"], "gilded");
    assert_eq!(row["model"]["DAddr"], "addr");
    assert_eq!(row["model"]["IComm"], "{cmnts . gilded}");
    assert_eq!(row["model"]["DComm"], "{cmnts . simple}");
}

#[test]
fn attack_safe_and_trivial() {
    let no_intruder = "AGENTS\n a, b\nROLES\n a:\n  send to b: senc(s, k)\n b:\n  recv from a: senc(Y, k)\nSECRETS\n s\n";
    assert_eq!(run_on(no_intruder, &["attack"]).0, 1);
    let leaked = "AGENTS\n a, b\nINTRUDERS\n eve: s\nROLES\n a:\n  send to b: m\nSECRETS\n s\n";
    let (code, out) = run_on(leaked, &["attack"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("ATTACK"));
    assert_eq!(
        dyaci(&["attack", "--scenario", "sealed"]).status.code(),
        Some(1)
    );
    assert_eq!(
        dyaci(&["attack", "--scenario", "nope"]).status.code(),
        Some(2)
    );
}

#[test]
fn selftest_passes() {
    let out = dyaci(&["selftest", "--seed", "11", "--cases", "40"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}
