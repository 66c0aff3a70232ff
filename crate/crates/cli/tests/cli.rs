use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use lctrace::suite::{random_quartic, remark_instance, triangle_instance};
use lctrace::trace::Trace;

fn lctrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lctrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_instance(dir: &Path, name: &str, text: String) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rewrites iteration lines of a trace file.
fn edit_records(path: &Path, edit: impl Fn(&mut Vec<Value>)) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let start = lines.iter().position(|l| l["type"] == "iteration").unwrap();
    let end = lines.iter().rposition(|l| l["type"] == "iteration").unwrap() + 1;
    let mut recs: Vec<Value> = lines[start..end].to_vec();
    edit(&mut recs);
    lines.splice(start..end, recs);
    let out: Vec<String> = lines.iter().map(|l| serde_json::to_string(l).unwrap()).collect();
    std::fs::write(path, out.join("\n") + "\n").unwrap();
}

/// A first-order trace that contains at least one contraction.
fn contracting_trace(dir: &Path) -> PathBuf {
    for seed in 0..16 {
        let inst = write_instance(dir, "q.json", random_quartic(seed, 2).unwrap().to_json_string());
        let trace = dir.join(format!("q{seed}.jsonl"));
        let out = lctrace(&["solve", "--instance", s(&inst), "--algo", "first", "--trace", s(&trace)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        if std::fs::read_to_string(&trace)
            .unwrap()
            .contains("\"step_class\":\"contract\"")
        {
            return trace;
        }
    }
    panic!("no contraction in the sampled instances");
}

#[test]
fn remark_instance_reaches_the_far_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(
        dir.path(),
        "remark.json",
        remark_instance(1e-5).unwrap().to_json_string(),
    );
    let trace = dir.path().join("t.jsonl");
    let summary = dir.path().join("s.json");
    let out = lctrace(&[
        "solve",
        "--instance",
        s(&inst),
        "--algo",
        "second",
        "--eps-g",
        "1e-4",
        "--eps-h",
        "1e-2",
        "--trace",
        s(&trace),
        "--summary",
        s(&summary),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("second_order_stationary"));
    let sum: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let x = sum["final_x"][0].as_f64().unwrap();
    assert!((x - 10.0).abs() <= 1e-6, "{x}");
    let check = lctrace(&["check", "--trace", s(&trace)]);
    assert_eq!(code(&check), 0, "{}", stdout(&check));
}

#[test]
fn malformed_instance_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = triangle_instance()
        .unwrap()
        .to_json_string()
        .replace("\"H_lip\"", "\"H_lipp\"");
    let inst = write_instance(dir.path(), "bad.json", text);
    let out = lctrace(&["solve", "--instance", s(&inst)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("H_lip"), "{}", stderr(&out));

    let inst = write_instance(dir.path(), "bad2.json", "{\"dimension\": 2,".into());
    assert_eq!(code(&lctrace(&["solve", "--instance", s(&inst)])), 1);
    assert_eq!(
        code(&lctrace(&["solve", "--instance", s(&dir.path().join("missing.json"))])),
        1
    );
}

#[test]
fn zero_iterations_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "tri.json", triangle_instance().unwrap().to_json_string());
    let trace = dir.path().join("t.jsonl");
    let out = lctrace(&["solve", "--instance", s(&inst), "--max-iter", "0", "--trace", s(&trace)]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("iteration_cap"));
    assert_eq!(Trace::read(&trace).unwrap().records.len(), 1);
}

#[test]
fn radius_growth_in_a_contraction_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let trace = contracting_trace(dir.path());
    assert_eq!(code(&lctrace(&["check", "--trace", s(&trace)])), 0);
    edit_records(&trace, |recs| {
        let k = recs.iter().position(|r| r["step_class"] == "contract").unwrap();
        let grown = recs[k]["delta"].as_f64().unwrap() * 1.5;
        recs[k + 1]["delta"] = grown.into();
    });
    let out = lctrace(&["check", "--trace", s(&trace)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("check failed: Lemma 3.4"), "{}", stdout(&out));
}

#[test]
fn multiplier_above_the_ceiling_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let trace = contracting_trace(dir.path());
    edit_records(&trace, |recs| recs[1]["lambda"] = 1e12.into());
    let out = lctrace(&["check", "--trace", s(&trace)]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("FAIL lemma-LBG")), "{text}");
    assert!(text.contains("Lemma LBG"));
}

#[test]
fn unknown_schema_version_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "tri.json", triangle_instance().unwrap().to_json_string());
    let trace = dir.path().join("t.jsonl");
    assert_eq!(
        code(&lctrace(&["solve", "--instance", s(&inst), "--trace", s(&trace)])),
        0
    );
    let text = std::fs::read_to_string(&trace)
        .unwrap()
        .replacen("\"schema_version\":1", "\"schema_version\":2", 1);
    std::fs::write(&trace, text).unwrap();
    let out = lctrace(&["check", "--trace", s(&trace)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("schema version 2"), "{}", stderr(&out));
}

#[test]
fn manifests_reproduce_runs() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "q.json", random_quartic(7, 3).unwrap().to_json_string());
    let first = dir.path().join("a.jsonl");
    let manifest = dir.path().join("run.json");
    let out = lctrace(&[
        "solve",
        "--instance",
        s(&inst),
        "--algo",
        "second",
        "--eps-g",
        "1e-6",
        "--trace",
        s(&first),
        "--write-manifest",
        s(&manifest),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let second = dir.path().join("b.jsonl");
    let out = lctrace(&["solve", "--manifest", s(&manifest), "--trace", s(&second)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let a = Trace::read(&first).unwrap().without_wall_clock().to_jsonl();
    let b = Trace::read(&second).unwrap().without_wall_clock().to_jsonl();
    assert_eq!(a, b);
}

#[test]
fn verify_compares_against_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "tri.json", triangle_instance().unwrap().to_json_string());
    let out = lctrace(&["verify", "--instance", s(&inst), "--resolution", "0.02"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    // start plus ten points, three comparisons each
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("PASS")).count(), 33);

    let big = write_instance(dir.path(), "big.json", random_quartic(1, 5).unwrap().to_json_string());
    let out = lctrace(&["verify", "--instance", s(&big)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("dimension"));
}

#[test]
fn suite_runs_generated_manifests_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let out = lctrace(&[
        "suite",
        "--dir",
        s(dir.path()),
        "--jobs",
        "4",
        "--generate",
        "6",
        "--seed",
        "40",
    ]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("6 runs, 0 errors, 0 at the iteration cap"));
    let traces = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with(".trace.jsonl"))
        .count();
    assert_eq!(traces, 6);

    // a serial rerun writes identical traces
    let before = std::fs::read_to_string(dir.path().join("quartic-40-1d.trace.jsonl")).unwrap();
    assert_eq!(code(&lctrace(&["suite", "--dir", s(dir.path()), "--jobs", "1"])), 0);
    let after = std::fs::read_to_string(dir.path().join("quartic-40-1d.trace.jsonl")).unwrap();
    let strip = |t: &str| Trace::from_jsonl(t).unwrap().without_wall_clock().to_jsonl();
    assert_eq!(strip(&before), strip(&after));

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&lctrace(&["suite", "--dir", s(empty.path())])), 1);
}
