//! End-to-end runs of the `kgrepair` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgrepair::fixtures::{RUNNING_GRAPH, RUNNING_MANIFEST};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_kgrepair");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("UTF-8 path")
}

struct Fixture {
    dir: tempfile::TempDir,
    manifest: PathBuf,
    graph: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("shapes.ttl");
    let graph = dir.path().join("data.ttl");
    fs::write(&manifest, RUNNING_MANIFEST).unwrap();
    fs::write(&graph, RUNNING_GRAPH).unwrap();
    Fixture {
        dir,
        manifest,
        graph,
    }
}

fn generate(f: &Fixture, paths: &str) -> PathBuf {
    let out = f.dir.path().join("bundles");
    let o = run(&[
        "generate",
        "--manifest",
        s(&f.manifest),
        "--graph",
        s(&f.graph),
        "--out",
        s(&out),
        "--seed",
        "1",
        "--paths",
        paths,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn validate_reports_conformance_through_the_exit_code() {
    let f = fixture();
    let ok = run(&[
        "validate",
        "--manifest",
        s(&f.manifest),
        "--graph",
        s(&f.graph),
    ]);
    assert_eq!(code(&ok), 0);

    let broken = f.dir.path().join("broken.ttl");
    let text = RUNNING_GRAPH.replace(
        "ex:Alice a ex:Professor, ex:CommitteeMember .",
        "ex:Alice a ex:Professor .",
    );
    assert_ne!(text, RUNNING_GRAPH, "fixture edit must apply");
    fs::write(&broken, text).unwrap();
    let out = f.dir.path().join("report.json");
    let bad = run(&[
        "validate",
        "--manifest",
        s(&f.manifest),
        "--graph",
        s(&broken),
        "--format",
        "json",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&bad), 2);
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["conforms"], Value::Bool(false));
}

#[test]
fn generate_writes_bundles_and_a_summary() {
    let f = fixture();
    let out = generate(&f, "first");
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("generation.json")).unwrap()).unwrap();
    let cases = summary["cases"].as_u64().unwrap();
    assert!(cases >= 1);
    assert_eq!(summary["complete"], Value::Bool(true));
    for entry in fs::read_dir(&out).unwrap() {
        let dir = entry.unwrap().path();
        if dir.is_dir() {
            for file in ["meta.json", "original.ttl", "invalid.ttl", "manifest.ttl"] {
                assert!(dir.join(file).is_file(), "{} lacks {file}", dir.display());
            }
        }
    }
}

#[test]
fn generate_refuses_a_nonconforming_graph() {
    let f = fixture();
    fs::write(
        &f.graph,
        RUNNING_GRAPH.replace(
            "ex:Alice a ex:Professor, ex:CommitteeMember .",
            "ex:Alice a ex:Professor .",
        ),
    )
    .unwrap();
    let o = run(&[
        "generate",
        "--manifest",
        s(&f.manifest),
        "--graph",
        s(&f.graph),
        "--out",
        s(&f.dir.path().join("bundles")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not conform"));
}

#[test]
fn missing_inputs_and_bad_flags_have_distinct_codes() {
    let f = fixture();
    let missing = run(&[
        "validate",
        "--manifest",
        s(&f.manifest),
        "--graph",
        "/nonexistent/data.ttl",
    ]);
    assert_eq!(code(&missing), 3);
    assert_eq!(code(&run(&["validate", "--manifest"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);

    let out = generate(&f, "first");
    let bad_adapter = run(&[
        "repair",
        "--bundles",
        s(&out),
        "--out",
        s(&f.dir.path().join("runs")),
        "--adapter",
        "ftp:nowhere",
    ]);
    assert_eq!(code(&bad_adapter), 1);
    let bad_strategy = run(&[
        "repair",
        "--bundles",
        s(&out),
        "--out",
        s(&f.dir.path().join("runs")),
        "--adapter",
        "oracle",
        "--strategy",
        "Q,Z",
    ]);
    assert_eq!(code(&bad_strategy), 1);
}

#[test]
fn oracle_command_adapter_scores_every_case_perfectly() {
    let f = fixture();
    let bundles = generate(&f, "all");
    let runs = f.dir.path().join("runs");
    let adapter = format!("cmd:'{BIN}' oracle-adapter --bundles '{}'", s(&bundles));
    let o = run(&[
        "repair",
        "--bundles",
        s(&bundles),
        "--out",
        s(&runs),
        "--adapter",
        &adapter,
        "--strategy",
        "S,F+",
        "--strategy",
        "Sn,G",
        "--parallel",
        "2",
        "--budget-usd",
        "100",
        "--dataset",
        "running",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let outcomes = read_jsonl(&runs.join("outcomes.jsonl"));
    assert!(!outcomes.is_empty());
    for rec in &outcomes {
        assert_eq!(rec["status"], "scored", "{rec}");
        assert_eq!(rec["dataset"], "running");
        let score = &rec["score"];
        for tier in ["syntactic", "semantic", "relaxed_iso", "iso"] {
            assert_eq!(
                score[tier],
                Value::Bool(true),
                "{tier} failed for {}",
                rec["case_id"]
            );
        }
    }
    assert!(runs.join("outcomes.csv").is_file());

    let summary_dir = f.dir.path().join("summary");
    let r = run(&[
        "report",
        s(&runs.join("outcomes.jsonl")),
        "--out",
        s(&summary_dir),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(summary_dir.join("summary.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(summary_dir.join("summary.md").is_file());
    let analysis = fs::read_to_string(summary_dir.join("analysis.csv")).unwrap();
    // one row per case, strategy and tier, plus the header
    assert_eq!(analysis.lines().count(), outcomes.len() * 4 + 1);
}

#[test]
fn malformed_adapter_fails_the_syntax_tier() {
    let f = fixture();
    let bundles = generate(&f, "first");
    let runs = f.dir.path().join("runs");
    let o = run(&[
        "repair",
        "--bundles",
        s(&bundles),
        "--out",
        s(&runs),
        "--adapter",
        "malformed",
        "--budget-usd",
        "100",
    ]);
    assert_eq!(code(&o), 0);
    for rec in read_jsonl(&runs.join("outcomes.jsonl")) {
        assert_eq!(rec["score"]["syntactic"], Value::Bool(false));
    }
}

#[test]
fn report_rejects_garbage_outcomes() {
    let f = fixture();
    let path = f.dir.path().join("junk.jsonl");
    fs::write(&path, "{\"not\": \"an outcome\"}\n").unwrap();
    let o = run(&[
        "report",
        s(&path),
        "--out",
        s(&f.dir.path().join("summary")),
    ]);
    assert_eq!(code(&o), 3);
}
