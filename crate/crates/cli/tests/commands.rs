mod common;

use std::process::Command;

use common::*;
use omgs_cli::replay::{cmd_replay, ReplayRequest};
use omgs_cli::run::{cmd_run, read_manifest, RunRequest, RunStatus, FAILURE_FILE, SUMMARY_FILE};

fn run_request(ws: &Workspace, case: usize, out: &str) -> RunRequest {
    RunRequest {
        case: ws.cases[case].clone(),
        snapshot: ws.snapshot_dir.clone(),
        backend: ws.backend_spec(),
        out: ws.path(out),
        config: None,
        mode: None,
        seed: None,
        matrix: None,
        run_id: None,
        embedder_url: None,
        force: false,
    }
}

#[test]
fn run_writes_a_valid_replayable_run() {
    let ws = Workspace::new();
    let report = cmd_run(&run_request(&ws, 1, "runs")).unwrap();
    assert!(report.is_valid(), "{:?}", report.failure);
    assert!(report.run_dir.join(SUMMARY_FILE).is_file());
    let m = read_manifest(&report.run_dir).unwrap();
    assert_eq!(m.status, RunStatus::Valid);
    assert_eq!(m.case_id, "OV-002");
    let replay = cmd_replay(&ReplayRequest {
        run: report.run_dir.clone(),
        snapshot: ws.snapshot_dir.clone(),
        config: None,
    })
    .unwrap();
    assert!(replay.summary_matches);
}

#[test]
fn existing_run_dir_needs_force() {
    let ws = Workspace::new();
    cmd_run(&run_request(&ws, 0, "runs")).unwrap();
    assert!(cmd_run(&run_request(&ws, 0, "runs")).is_err());
    let mut again = run_request(&ws, 0, "runs");
    again.force = true;
    assert!(cmd_run(&again).unwrap().is_valid());
}

#[test]
fn binary_exit_codes() {
    let ws = Workspace::new();
    let bin = env!("CARGO_BIN_EXE_omgs");
    let ok = Command::new(bin)
        .args(["run", ws.cases[2].to_str().unwrap(), "--snapshot"])
        .arg(&ws.snapshot_dir)
        .args(["--backend", &ws.backend_spec(), "--out"])
        .arg(ws.path("runs"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let fake = ws.path("fake.json");
    write_script(&fake, &hallucinating_chair_script("EB-0000000000"));
    let failed = Command::new(bin)
        .args(["run", ws.cases[2].to_str().unwrap(), "--snapshot"])
        .arg(&ws.snapshot_dir)
        .arg("--backend")
        .arg(format!("scripted:{}", fake.display()))
        .arg("--out")
        .arg(ws.path("runs"))
        .output()
        .unwrap();
    assert_eq!(failed.status.code(), Some(1), "{}", String::from_utf8_lossy(&failed.stderr));
    let status: serde_json::Value = serde_json::from_slice(&failed.stdout).unwrap();
    let run_dir = std::path::PathBuf::from(status["run_dir"].as_str().unwrap());
    assert!(run_dir.join(FAILURE_FILE).is_file());

    let bad = Command::new(bin).args(["run", "/nonexistent", "--snapshot", "/nope", "--backend", "scripted:x", "--out", "/tmp"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ingest_skips_bad_records_and_aborts_on_corrupt_lines() {
    use omgs_cli::ingest::{cmd_ingest, IngestConfig, IngestRequest};
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("c.jsonl");
    std::fs::write(
        &good,
        format!("{}{{\"stream\": \"guideline\", \"title\": \"\", \"text\": \"x\"}}\n", corpus_lines()),
    )
    .unwrap();
    let req = |out: &str, corpus: &std::path::Path| IngestRequest {
        corpus: vec![corpus.to_path_buf()],
        out: dir.path().join(out),
        config: IngestConfig::default(),
    };
    let a = cmd_ingest(&req("a", &good)).unwrap();
    assert_eq!(a.records, TOPICS.len());
    assert_eq!(a.skipped.len(), 1);
    assert_eq!(a.skipped[0].line, TOPICS.len() + 1);
    let b = cmd_ingest(&req("b", &good)).unwrap();
    assert_eq!(a.snapshot_id, b.snapshot_id);
    assert!(cmd_ingest(&req("a", &good)).is_err());

    let corrupt = dir.path().join("bad.jsonl");
    std::fs::write(&corrupt, "{\"stream\": \"guideline\", \"title\": \"t\", \"text\": \"x\"}\n{not json\n").unwrap();
    let err = format!("{:#}", cmd_ingest(&req("c", &corrupt)).unwrap_err());
    assert!(err.contains("stage ingest") && err.contains(":2:"), "{err}");
    assert!(!dir.path().join("c").exists());
}
