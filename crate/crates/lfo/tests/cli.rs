mod common;

use std::path::Path;
use std::process::Command;

use serde_json::Value;

use common::fixtures;
use lfo::cli::run;
use lfo_core::decoder::ExecutionTrace;
use lfo_core::grasp::SuperquadricParams;
use lfo_core::laban::parse_score;
use lfo_core::taskmodel::{parse_program, to_canonical};

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn lfo(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("lfo").chain(args.iter().copied()), &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_str().unwrap().to_string()
}

fn error_of(o: &Out) -> Value {
    serde_json::from_str(o.stderr.trim()).unwrap_or_else(|e| panic!("stderr is not one JSON object ({e}): {}", o.stderr))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn encode_writes_the_fixture_program() {
    let dir = tempfile::tempdir().unwrap();
    for demo in ["box_demo", "shelf_demo", "garbage_demo", "fridge_demo"] {
        let out = dir.path().join(format!("{demo}.program.json"));
        let o = lfo(&["encode", &fixture(&format!("{demo}.rec.json")), "-o", path_str(&out)]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let written = std::fs::read_to_string(&out).unwrap();
        assert_eq!(written, std::fs::read_to_string(fixtures().join(format!("{demo}.program.json"))).unwrap());
        assert_eq!(lfo(&["validate", path_str(&out)]).code, 0);
    }
    let o = lfo(&["encode", &fixture("box_demo.rec.json")]);
    assert_eq!(o.code, 0);
    assert_eq!(to_canonical(&parse_program(&o.stdout).unwrap()), o.stdout);
}

#[test]
fn validate_lists_grammar_violations() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = parse_program(&std::fs::read_to_string(fixtures().join("box_demo.program.json")).unwrap()).unwrap();
    p.frames.swap(0, 4);
    let bad = dir.path().join("bad.program.json");
    std::fs::write(&bad, to_canonical(&p)).unwrap();
    let o = lfo(&["validate", path_str(&bad)]);
    assert_eq!(o.code, 1);
    let e = error_of(&o);
    assert_eq!(e["error"], "grammar");
    assert!(!e["violations"].as_array().unwrap().is_empty());
    assert!(e["violations"][0]["message"].is_string());
}

#[test]
fn domain_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = lfo(&["encode", path_str(&dir.path().join("missing.rec.json"))]);
    assert_eq!(o.code, 1);
    assert_eq!(error_of(&o)["error"], "io");

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    let o = lfo(&["validate", path_str(&junk)]);
    assert_eq!(o.code, 1);
    assert_eq!(error_of(&o)["error"], "parse");

    let o = lfo(&["simulate", &fixture("box_demo.program.json"), "atlantis", "fixed6"]);
    assert_eq!(o.code, 1);
    assert_eq!(error_of(&o)["error"], "invalid_input");
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["nosuch"][..], &[], &["encode"]] {
        let o = lfo(args);
        assert_eq!(o.code, 2, "{args:?}");
        assert!(o.stderr.contains("Usage"), "{args:?}: {}", o.stderr);
    }
    let o = lfo(&["sq", "gen", "--seed", "x"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("--seed"));
    let o = lfo(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("simulate"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_lfo");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = run(&["nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = run(&["validate", &fixture("box_demo.program.json")]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["validate", "/nonexistent/program.json"]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"], "io");
}

#[test]
fn simulate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("box.trace.ndjson");
    let program = fixture("box_demo.program.json");
    let o = lfo(&["simulate", &program, "box_world", "fixed6", "--trace", path_str(&trace)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let summary: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(summary["completed"], true);
    assert_eq!(summary["frames_executed"], 5);
    assert_eq!(summary["verification"]["passed"], true);

    let o = lfo(&["verify", path_str(&trace), &program]);
    assert_eq!(o.code, 0, "{}", o.stderr);

    // a truncated trace leaves frames unexecuted
    let t = ExecutionTrace::from_ndjson(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    let keep = t.records.iter().position(|r| matches!(r, lfo_core::decoder::TraceRecord::Verdict(v) if v.frame == 2)).unwrap();
    let cut = ExecutionTrace { records: t.records[..=keep].to_vec() };
    let short = dir.path().join("short.trace.ndjson");
    std::fs::write(&short, cut.to_ndjson()).unwrap();
    let o = lfo(&["verify", path_str(&short), &program]);
    assert_eq!(o.code, 1);
    let e = error_of(&o);
    assert_eq!(e["error"], "verification");
    assert_eq!(e["frames"], serde_json::json!([3, 4]));
    let report: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["frames"][3]["status"], "not_executed");
}

#[test]
fn failed_run_still_writes_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut world = lfo_core::decoder::bundled_worlds().into_iter().find(|w| w.name == "box_world").unwrap();
    // no plate, and the table ends before the place position
    world.supports.retain(|s| s.name != "plate");
    world.supports[0].max[1] = 0.0;
    let wpath = dir.path().join("bare.world.json");
    std::fs::write(&wpath, lfo_core::decoder::serialize_world(&world)).unwrap();
    let trace = dir.path().join("t.ndjson");
    let o = lfo(&["simulate", &fixture("box_demo.program.json"), path_str(&wpath), "mobile7", "--trace", path_str(&trace)]);
    assert_eq!(o.code, 1);
    let e = error_of(&o);
    assert!(e["frame"].is_u64(), "{e}");
    let summary: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(summary["completed"], false);
    assert!(ExecutionTrace::from_ndjson(&std::fs::read_to_string(&trace).unwrap()).is_ok());
}

#[test]
fn laban_prints_a_parseable_score() {
    let o = lfo(&["laban", &fixture("shelf_demo.rec.json")]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let score = parse_score(&o.stdout).unwrap();
    assert_eq!(score.rows.len(), 7);
    let o = lfo(&["laban", &fixture("shelf_demo.rec.json"), "--json"]);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 7);
}

#[test]
fn generated_cloud_fits_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = lfo(&["sq", "gen", "--seed", "11", "--points", "600"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let header: Value = serde_json::from_str(o.stdout.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    let truth: SuperquadricParams<f64> = serde_json::from_value(header["params"].clone()).unwrap();
    let cloud = dir.path().join("c.xyz");
    std::fs::write(&cloud, &o.stdout).unwrap();
    let o = lfo(&["sq", "fit", path_str(&cloud)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let fit: Value = serde_json::from_str(&o.stdout).unwrap();
    let mut got: Vec<f64> = ["a1", "a2", "a3"].iter().map(|k| fit["params"][k].as_f64().unwrap()).collect();
    let mut want = truth.sizes().to_vec();
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() / w < 0.05, "{got:?} vs {want:?}");
    }
}

#[test]
fn web_reports_force_closure() {
    let dir = tempfile::tempdir().unwrap();
    let q = SuperquadricParams::<f64>::new([0.04, 0.04, 0.06], 1.0, 1.0);
    let params = dir.path().join("q.json");
    std::fs::write(&params, serde_json::to_string(&q).unwrap()).unwrap();
    let o = lfo(&["sq", "web", "--closure", "passive-force", "--params", path_str(&params)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["force_closure"], true);
    assert_eq!(v["web"]["contacts"].as_array().unwrap().len(), 3);
    let o = lfo(&["sq", "web", "--closure", "firm-grip", "--params", path_str(&params)]);
    assert_eq!(o.code, 1);
}

#[test]
fn contact_classify_prints_classes() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("scenarios.json");
    std::fs::write(
        &file,
        r#"[
          {"name": "free", "contacts": []},
          {"name": "on table", "contacts": [{"normal": [0, 0, 1]}]},
          {"name": "in slot", "contacts": [{"normal": [0, 0, 1]}, {"normal": [0, 0, -1]}]},
          {"name": "in corner", "contacts": [{"normal": [0, 0, 1]}, {"normal": [1, 0, 0]}, {"normal": [0, 1, 0]}]}
        ]"#,
    )
    .unwrap();
    let o = lfo(&["contact", "classify", path_str(&file)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    let classes: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["class"].as_str().unwrap()).collect();
    assert_eq!(classes, ["FullSphere", "Hemisphere", "GreatCircle", "ConvexRegion"]);

    std::fs::write(&file, r#"[{"name": "bad", "contacts": [{"normal": [0, 0, 2]}]}]"#).unwrap();
    assert_eq!(lfo(&["contact", "classify", path_str(&file)]).code, 1);
}
