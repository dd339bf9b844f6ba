use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn cgrl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgrl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("CGRL_OUTPUT_DIR")
        .output()
        .expect("run cgrl")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn phone_book_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cgrl(&["run", &fixture("phone_book.mjs-mini"), "--variant", "optimistic", "--emit-copies"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.jsonl", "dcg.json", "fg.json", "cg.json", "flows.json", "copies.json", "report.json", "report.csv", "report.txt"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let r = report(tmp.path());
    assert_eq!(r["schemaVersion"], 1);
    assert_eq!(r["missedEdges"].as_array().unwrap().len(), 1);
    assert_eq!(r["distribution"]["coarse"]["DynamicPropertyAccess"]["pct"], 100.0);
    let edges = r["metrics"].as_array().unwrap().iter().find(|m| m["metric"] == "reachableEdges").unwrap();
    assert!((edges["recall"].as_f64().unwrap() - 0.667).abs() < 0.001);
}

#[test]
fn supplied_graphs_give_the_same_report() {
    let full = tempfile::tempdir().unwrap();
    let src = fixture("phone_book.mjs-mini");
    assert!(cgrl(&["run", &src], full.path()).status.success());
    let fg = full.path().join("fg.json");
    let cg = full.path().join("cg.json");
    let list = format!("{},{}", fg.display(), cg.display());
    let again = tempfile::tempdir().unwrap();
    let o = cgrl(&["run", &src, "--from-artifacts", &list], again.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(full.path().join("report.json")).unwrap(),
        fs::read(again.path().join("report.json")).unwrap()
    );

    let trace = full.path().join("trace.jsonl");
    let dcg = full.path().join("dcg.json");
    let list = format!("{},{},{},{}", trace.display(), dcg.display(), fg.display(), cg.display());
    let third = tempfile::tempdir().unwrap();
    assert!(cgrl(&["run", &src, "--from-artifacts", &list], third.path()).status.success());
    assert_eq!(
        fs::read(full.path().join("report.json")).unwrap(),
        fs::read(third.path().join("report.json")).unwrap()
    );
}

#[test]
fn dependent_call_is_resolved() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(cgrl(&["run", &fixture("dependent_call.mjs-mini")], tmp.path()).status.success());
    let r = report(tmp.path());
    assert_eq!(r["missedEdges"].as_array().unwrap().len(), 2);
    assert_eq!(r["dependentCallsResolved"], 1);
    assert_eq!(r["distribution"]["coarse"]["DynamicPropertyAccess"]["count"], 2.0);
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fixture("phone_book.mjs-mini");
    for args in [
        vec!["run", src.as_str(), "--variant", "bogus"],
        vec!["run", src.as_str(), "--no-such-flag"],
        vec!["run"],
        vec!["run", src.as_str(), "--corpus", "."],
    ] {
        let o = cgrl(&args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn analysis_errors_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.mjs-mini");
    fs::write(&bad, "var = ;\n").unwrap();
    let o = cgrl(&["run", &bad.to_string_lossy()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn schema_errors_name_file_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let art = tmp.path().join("graph.json");
    fs::write(&art, r#"{"schemaVersion": 1, "kind": "mystery"}"#).unwrap();
    let o = cgrl(
        &["run", &fixture("phone_book.mjs-mini"), "--from-artifacts", &art.to_string_lossy()],
        &tmp.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("graph.json") && err.contains("`kind`"), "{err}");

    let full = tempfile::tempdir().unwrap();
    assert!(cgrl(&["run", &fixture("phone_book.mjs-mini")], full.path()).status.success());
    let o = cgrl(
        &[
            "run",
            &fixture("phone_book.mjs-mini"),
            "--variant",
            "pessimistic",
            "--from-artifacts",
            &full.path().join("fg.json").to_string_lossy(),
        ],
        &tmp.path().join("out2"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`variant`"));
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cgrl"))
        .args(["run", &fixture("phone_book.mjs-mini"), "--quiet"])
        .env("CGRL_OUTPUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("report.json").exists());
}

#[test]
fn corpus_runs_are_byte_identical() {
    let dir = fixtures().join("param_return");
    let dir = dir.to_string_lossy();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        let o = cgrl(&["run", "--corpus", &dir, "--variant", "pessimistic", "--fine-grained"], out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let agg: Value = serde_json::from_str(&fs::read_to_string(a.path().join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["programs"].as_array().unwrap().len(), 10);
    assert!(agg["distribution"]["coarse"]["ParameterPass"]["count"].as_f64().unwrap() > 0.0);
    for f in ["aggregate.json", "aggregate.csv", "01_twice/report.json", "10_thunk/report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn dump_ast_prints_json() {
    let o = Command::new(env!("CARGO_BIN_EXE_cgrl"))
        .args(["dump-ast", &fixture("phone_book.mjs-mini")])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}
