use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfa")).args(args).env_remove("CFA_BUDGET_MS").output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const ID: &str = "(define (id x) x)\n(id 3)\n(id 4)\n";

#[test]
fn analyze_mcfa_prints_json() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "id.scm", ID);
    let o = cfa(&["analyze", "--lang", "scheme", "--analysis", "mcfa", "--m", "1", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["analysis"], "mcfa");
    assert_eq!(v["m"], 1);
    assert_eq!(v["halt_flow"], serde_json::json!(["4"]));
    assert_eq!(v["partial"], false);
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "id.scm", ID);
    let a = cfa(&["analyze", "--k", "2", f.to_str().unwrap()]);
    let b = cfa(&["analyze", "--k", "2", f.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn incompatible_pair_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.fj", "main { Object o = new Object(); return o; }");
    let o = cfa(&["analyze", "--lang", "fj", "--analysis", "mcfa", "--m", "1", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
    let s = write(&dir, "id.scm", ID);
    assert_eq!(cfa(&["analyze", "--analysis", "fj-kcfa", s.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cfa(&["analyze", "--analysis", "mcfa", "--k", "1", s.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn input_errors_exit_2_without_a_report() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.scm", "(define (f x) x");
    let o = cfa(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let missing = dir.path().join("nope.scm");
    assert_eq!(cfa(&["analyze", missing.to_str().unwrap()]).status.code(), Some(2));
    let unknown = write(&dir, "x.txt", ID);
    assert_eq!(cfa(&["analyze", unknown.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_3_with_partial_report() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "id.scm", ID);
    let o = cfa(&["analyze", "--max-transfers", "2", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["partial"], true);
}

#[test]
fn budget_env_var_is_read() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "id.scm", ID);
    let o = Command::new(env!("CARGO_BIN_EXE_cfa"))
        .args(["analyze", f.to_str().unwrap()])
        .env("CFA_BUDGET_MS", "soon")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_cfa"))
        .args(["analyze", f.to_str().unwrap()])
        .env("CFA_BUDGET_MS", "10000")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bench_prints_the_matrix() {
    let o = cfa(&["bench", "--family", "worst-case", "--n", "1..4", "--analyses", "kcfa:1,mcfa:1,polykcfa:1,kcfa:0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "program,terms,analysis,k_or_m,policy,transfers,configs,inlinable,time_ms,timeout");
    assert_eq!(lines.len(), 1 + 4 * 4);
    assert!(lines[1].starts_with("worst-case-1,19,kcfa,1,,5,"));
    let seq = cfa(&["bench", "--family", "worst-case", "--n", "3", "--exec", "sequential", "--format", "json"]);
    let par = cfa(&["bench", "--family", "worst-case", "--n", "3", "--exec", "parallel", "--format", "json"]);
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
        for row in v.as_array_mut().unwrap() {
            row.as_object_mut().unwrap().remove("time_ms");
        }
        v
    };
    assert_eq!(strip(&seq), strip(&par));
}

#[test]
fn bench_takes_files_and_rejects_empty_runs() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "id.scm", ID);
    let o = cfa(&["bench", "--analyses", "kcfa:0", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    assert_eq!(cfa(&["bench"]).status.code(), Some(2));
    assert_eq!(cfa(&["bench", "--family", "identity", "--analyses", "nope:1"]).status.code(), Some(2));
}

#[test]
fn fj_analysis_in_both_representations() {
    let dir = TempDir::new().unwrap();
    let src = "class A extends Object { A() { super(); } }
               class B extends Object { B() { super(); } }
               class Id extends Object { Id() { super(); } Object id(Object x) { return x; } }
               main { Id i = new Id(); A a = new A(); B b = new B(); Object r = i.id(a); Object s = i.id(b); return s; }";
    let f = write(&dir, "id.fj", src);
    let c = cfa(&["analyze", "--k", "1", f.to_str().unwrap()]);
    let m = cfa(&["analyze", "--k", "1", "--env-repr", "map", f.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(c.stdout, m.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&c)).unwrap();
    assert_eq!(v["halt_flow"], serde_json::json!(["B"]));
    let z = cfa(&["analyze", "--k", "0", "--format", "text", f.to_str().unwrap()]);
    assert!(stdout(&z).contains("halt: {A, B}"));
}

#[test]
fn trace_and_convert() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "id.scm", ID);
    let o = cfa(&["trace", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("0\t{}\t⟨⟩"));
    let o = cfa(&["convert", f.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "((kappa (id) (id 3 (kappa (%_1) (id 4 halt)))) (lambda (x %k2) (%k2 x)))");
    let cps = write(&dir, "id.cps", &stdout(&o));
    let back = cfa(&["analyze", cps.to_str().unwrap()]);
    let direct = cfa(&["analyze", f.to_str().unwrap()]);
    assert_eq!(back.stdout, direct.stdout);
}
