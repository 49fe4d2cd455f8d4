//! End-to-end tests of the `revdec` binary: every assertion goes through the
//! real argv surface and the files the commands leave behind.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use revdec::{CommitEvent, DecodeTrace64, DecoderConfig, Hypothesis64, Vocabulary};
use revdec_cli::trace_io;

fn revdec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revdec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = revdec(dir, args);
    assert!(
        out.status.success(),
        "revdec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn report(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("stdout is a JSON report")
}

#[test]
fn gen_is_deterministic_and_stdout_matches_the_file() {
    let dir = TempDir::new().unwrap();
    let flags = ["gen", "--seed", "42", "--vocab", "6", "--frames", "8", "--instability", "0.3"];
    let piped = ok(dir.path(), &flags);
    ok(dir.path(), &[&flags[..], &["-o", "a.json"]].concat());
    ok(dir.path(), &[&flags[..], &["-o", "b.json"]].concat());
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(piped.stdout, a);
}

#[test]
fn out_of_range_instability_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = revdec(dir.path(), &["gen", "--instability", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("instability must be in [0,1]"), "stderr: {err}");
}

const TOY_LATTICE: &str = "\
LATTICE v1 N=4 T=3 K=1 BLANK=0 BOS=1
VOCAB <blank> <s> a b
DEFAULT 0.7 0 0.2 0.1
ROW f=1 ctx=1 0.1 0 0.6 0.3
ROW f=2 ctx=2 0.5 0 0.1 0.4
";

#[test]
fn lattice_scenarios_decode_end_to_end() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("toy.lat"), TOY_LATTICE).unwrap();
    ok(dir.path(), &["gen", "--from-lattice", "toy.lat", "-o", "s.json"]);
    let scenario = fs::read_to_string(dir.path().join("s.json")).unwrap();
    assert!(scenario.contains("toy.lat"), "scenario should reference the lattice: {scenario}");

    let out = ok(dir.path(), &["decode", "s.json"]);
    let rep = report(&out);
    assert!(rep.get("ne").is_some());
    assert!(dir.path().join("s.trace.jsonl").exists());
}

#[test]
fn zero_window_reports_exactly_zero_ne() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--seed", "42", "-o", "s.json"]);
    let rep = report(&ok(dir.path(), &["decode", "s.json", "--rw", "0"]));
    assert_eq!(rep["ne"], Value::from(0.0));
    assert_eq!(rep["erased_total"], Value::from(0));
}

#[test]
fn unit_beam_reports_zero_ne() {
    let dir = TempDir::new().unwrap();
    for seed in ["3", "11", "27"] {
        ok(dir.path(), &["gen", "--seed", seed, "-o", "s.json"]);
        let rep = report(&ok(dir.path(), &["decode", "s.json", "--beam", "1"]));
        assert_eq!(rep["ne"], Value::from(0.0), "seed {seed}");
    }
}

#[test]
fn commit_granularity_does_not_change_the_final_line() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--seed", "9", "--frames", "10", "-o", "s.json"]);
    ok(dir.path(), &["decode", "s.json", "--commit", "frame", "-o", "f.jsonl"]);
    ok(dir.path(), &["decode", "s.json", "--commit", "chunk", "-o", "c.jsonl"]);
    let last = |name: &str| {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        text.lines().last().unwrap().to_string()
    };
    assert_eq!(last("f.jsonl"), last("c.jsonl"));
}

#[test]
fn metrics_reproduces_the_decode_report_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &[
        "gen", "--seed", "5", "--reference", "w2 w3 w4", "-o", "s.json",
    ]);
    let decoded = ok(dir.path(), &["decode", "s.json", "-o", "t.jsonl"]);
    let recomputed = ok(dir.path(), &["metrics", "t.jsonl"]);
    assert_eq!(decoded.stdout, recomputed.stdout);
}

#[test]
fn rw_override_can_lift_a_stored_window() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--seed", "8", "-o", "plain.json"]);
    ok(dir.path(), &[
        "gen", "--seed", "8", "--rw", "3", "--word-reward", "1.0", "-o", "windowed.json",
    ]);
    let direct = ok(dir.path(), &["decode", "plain.json", "-o", "a.jsonl"]);
    let lifted = ok(dir.path(), &["decode", "windowed.json", "--rw", "none", "-o", "b.jsonl"]);
    assert_eq!(direct.stdout, lifted.stdout);
}

/// A trace with one shrink, one pure extension, and one deep rewrite. Nine
/// final tokens, six erased along the way.
fn mixed_revision_trace() -> (DecodeTrace64, Vocabulary) {
    let vocab = Vocabulary::synthetic(16);
    let commits = vec![
        CommitEvent { frame_index: 2, displayed: vec![2] },
        CommitEvent { frame_index: 4, displayed: vec![3, 4, 5] },
        CommitEvent { frame_index: 6, displayed: vec![3, 4, 5, 6, 7] },
        CommitEvent { frame_index: 8, displayed: vec![8, 9, 7, 10, 11, 12, 13, 4, 5] },
    ];
    let trace = DecodeTrace64 {
        config: DecoderConfig::default(),
        commits,
        final_hypothesis: Hypothesis64 {
            tokens: vec![1, 8, 9, 7, 10, 11, 12, 13, 4, 5],
            log_score: -5.0,
            emit_frames: vec![0, 4, 4, 4, 6, 6, 6, 8, 8, 8],
        },
        source_frames: 8,
        reference: None,
    };
    (trace, vocab)
}

#[test]
fn metrics_accepts_traces_from_external_decoders() {
    let dir = TempDir::new().unwrap();
    let (trace, vocab) = mixed_revision_trace();
    fs::write(dir.path().join("ext.jsonl"), trace_io::to_jsonl(&trace, &vocab)).unwrap();

    let rep = report(&ok(dir.path(), &["metrics", "ext.jsonl"]));
    let ne = rep["ne"].as_f64().unwrap();
    assert!((ne - 2.0 / 3.0).abs() < 1e-9, "ne = {ne}");
    assert_eq!(rep["erased_total"], Value::from(6));
    assert_eq!(rep["final_length"], Value::from(9));
    assert_eq!(
        rep["revision_histogram"],
        serde_json::json!({ "0": 1, "1": 1, "5": 1 })
    );
}

#[test]
fn single_commit_traces_have_an_empty_histogram() {
    let dir = TempDir::new().unwrap();
    let vocab = Vocabulary::synthetic(6);
    let trace = DecodeTrace64 {
        config: DecoderConfig::default(),
        commits: vec![CommitEvent { frame_index: 3, displayed: vec![2, 4] }],
        final_hypothesis: Hypothesis64 {
            tokens: vec![1, 2, 4],
            log_score: -1.0,
            emit_frames: vec![0, 1, 3],
        },
        source_frames: 3,
        reference: None,
    };
    fs::write(dir.path().join("one.jsonl"), trace_io::to_jsonl(&trace, &vocab)).unwrap();
    let rep = report(&ok(dir.path(), &["metrics", "one.jsonl"]));
    assert_eq!(rep["revision_histogram"], serde_json::json!({}));
}

#[test]
fn corrupt_traces_name_the_violated_invariant() {
    let dir = TempDir::new().unwrap();
    let (trace, vocab) = mixed_revision_trace();
    let text = trace_io::to_jsonl(&trace, &vocab)
        .replace("\"final\":[8,9,7,10,11,12,13,4,5]", "\"final\":[8,9,7]");
    fs::write(dir.path().join("bad.jsonl"), text).unwrap();
    let out = revdec(dir.path(), &["metrics", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("final hypothesis"), "stderr: {err}");
}

fn gen_sweep_inputs(dir: &Path, seeds: &[u64]) -> Vec<String> {
    seeds
        .iter()
        .map(|seed| {
            let name = format!("s{seed}.json");
            ok(dir, &["gen", "--seed", &seed.to_string(), "-o", &name]);
            name
        })
        .collect()
}

#[test]
fn sweep_grid_rows_hold_the_window_guarantees() {
    let dir = TempDir::new().unwrap();
    let scenarios = gen_sweep_inputs(dir.path(), &[0, 1, 2, 3, 4, 5]);
    let manifest = serde_json::json!({
        "scenarios": scenarios,
        "grid": { "rw": [Value::Null, 0, 3] },
    });
    fs::write(dir.path().join("m.json"), manifest.to_string()).unwrap();
    ok(dir.path(), &["sweep", "m.json"]);

    let mut rows = csv::Reader::from_path(dir.path().join("m.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["id", "b", "u", "rw", "commit_mode", "ne", "al_ms", "harness_bleu", "max_erasure", "error"]
    );
    let records: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 18);
    for (i, rec) in records.iter().enumerate() {
        assert_eq!(&rec[0], format!("synth-s{}-v6-t8", i / 3).as_str(), "manifest order");
        let rw = &rec[3];
        match i % 3 {
            0 => assert_eq!(rw, "none"),
            1 => {
                assert_eq!(rw, "0");
                assert_eq!(&rec[5], "0", "rw=0 row must have ne 0: {rec:?}");
            }
            _ => {
                assert_eq!(rw, "3");
                let max_erasure: usize = rec[8].parse().unwrap();
                assert!(max_erasure <= 3, "rw=3 row erased {max_erasure}");
            }
        }
        assert_eq!(&rec[9], "", "no cell should fail: {rec:?}");
    }

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 18);
    assert_eq!(summary["groups"].as_array().unwrap().len(), 3);
}

#[test]
fn empty_manifests_produce_an_empty_table() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("m.json"), r#"{ "scenarios": [] }"#).unwrap();
    let out = ok(dir.path(), &["sweep", "m.json"]);
    assert!(out.status.success());
    let csv_text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 1, "header only: {csv_text}");
}

#[test]
fn a_broken_scenario_fails_its_cell_but_not_the_sweep() {
    let dir = TempDir::new().unwrap();
    let scenarios = gen_sweep_inputs(dir.path(), &[7]);
    let manifest = serde_json::json!({
        "scenarios": [scenarios[0], "missing.json"],
    });
    fs::write(dir.path().join("m.json"), manifest.to_string()).unwrap();
    let out = revdec(dir.path(), &["sweep", "m.json"]);
    assert_eq!(out.status.code(), Some(1));

    let csv_text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(csv_text.as_bytes());
    let records: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(&records[0][0], "synth-s7-v6-t8");
    assert_eq!(&records[0][9], "");
    assert_eq!(&records[1][0], "missing.json");
    assert!(records[1][9].contains("cannot read scenario file"));
}

#[test]
fn duplicate_scenario_ids_reject_the_whole_manifest() {
    let dir = TempDir::new().unwrap();
    let scenarios = gen_sweep_inputs(dir.path(), &[11]);
    fs::copy(dir.path().join(&scenarios[0]), dir.path().join("copy.json")).unwrap();
    let manifest = serde_json::json!({
        "scenarios": [scenarios[0], "copy.json"],
    });
    fs::write(dir.path().join("m.json"), manifest.to_string()).unwrap();

    let out = revdec(dir.path(), &["sweep", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(
        err.contains("duplicate scenario id") && err.contains("synth-s11-v6-t8"),
        "stderr: {err}"
    );
    assert!(!dir.path().join("m.csv").exists(), "rejected sweeps must not leave outputs");
}
