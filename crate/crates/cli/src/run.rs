//! Case runs and their on-disk artifacts.
//!
//! ```text
//! <out>/<run_id>/
//!   config.json            canonical config; its SHA-256 is the config hash
//!   structured_case.json   case the run was performed on
//!   transcript.jsonl       hash-chained deliberation transcript
//!   summary.json           {run_id, case_id, mode, summary}   (valid runs)
//!   failure.json           machine-readable failure record    (failed runs)
//!   usage.json             {run_id, ledger}
//!   manifest.json          RunManifest, written last
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use omgs_core::backend::AgentBackend;
use omgs_core::case::extract::DEFAULT_EXTRACTION_RETRIES;
use omgs_core::case::packet::{load_case_packet, read_structured_case, STRUCTURED_CASE};
use omgs_core::case::{extract_case, merge_extractions, StructuredCase};
use omgs_core::deliberation::{
    run_case, validate_decision_summary, Backends, CaseFailure, CaseInputs, DecisionSummary, DeliberationConfig, Mode,
    ProtocolError, UsageLedger, UsageRecord, UsageTotals,
};
use omgs_core::digest::{canonical_json, sha256_hex, FieldHasher};
use omgs_core::evidence::CorpusSnapshot;
use omgs_core::roles::AccessMatrix;

use crate::backend_spec::{open_backend, open_embedder};
use crate::error::RunFailed;

pub const CONFIG_FILE: &str = "config.json";
pub const CASE_FILE: &str = "structured_case.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FAILURE_FILE: &str = "failure.json";
pub const USAGE_FILE: &str = "usage.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Valid,
    Failed,
}

/// Wall-clock facts. Excluded from every determinism comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Volatile {
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub case_id: String,
    pub mode: Mode,
    pub evidence_included: bool,
    pub dossier_included: bool,
    pub snapshot_id: String,
    pub embedder_id: String,
    pub backend_id: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_stage: Option<String>,
    pub usage: UsageTotals,
    /// SHA-256 of every other artifact in the run directory.
    pub artifacts: BTreeMap<String, String>,
    pub volatile: Volatile,
}

impl RunManifest {
    /// The manifest with its volatile block blanked.
    pub fn stable(&self) -> RunManifest {
        RunManifest {
            volatile: Volatile {
                started_at: String::new(),
                finished_at: String::new(),
                elapsed_ms: 0,
            },
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryArtifact {
    pub run_id: String,
    pub case_id: String,
    pub mode: Mode,
    pub summary: DecisionSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageArtifact {
    pub run_id: String,
    pub ledger: UsageLedger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub run_id: String,
    pub case_id: String,
    pub stage: String,
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved_citations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    /// Case packet directory. A `structured_case.json` inside it is used as
    /// is; otherwise documents are extracted with the run backend.
    pub case: PathBuf,
    pub snapshot: PathBuf,
    /// `scripted:<file>` or `http:<url>`.
    pub backend: String,
    /// Root under which the run directory is created.
    pub out: PathBuf,
    #[serde(default)]
    pub config: Option<DeliberationConfig>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub matrix: Option<PathBuf>,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub embedder_url: Option<String>,
    #[serde(default)]
    pub force: bool,
}

impl RunRequest {
    pub fn effective_config(&self) -> DeliberationConfig {
        let mut c = self.config.clone().unwrap_or_default();
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureRecord>,
}

impl RunReport {
    pub fn is_valid(&self) -> bool {
        self.manifest.status == RunStatus::Valid
    }

    /// `Err(RunFailed)` for a failed run, for exit-code mapping.
    pub fn into_result(self) -> anyhow::Result<RunReport> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(RunFailed {
                run_id: f.run_id.clone(),
                stage: f.stage.clone(),
                message: f.message.clone(),
            }
            .into()),
        }
    }
}

/// Deterministic id from what determines the run's content.
pub fn derive_run_id(case_id: &str, config: &DeliberationConfig, snapshot_id: &str, backend_id: &str) -> String {
    let mut h = FieldHasher::new();
    h.str("omgs-run/v1")
        .str(case_id)
        .str(&config.config_hash())
        .str(snapshot_id)
        .str(backend_id);
    format!("run-{}", &h.finish_hex()[..16])
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("plain data serializes");
    b.push(b'\n');
    b
}

/// Structured case for a packet: the stored one if present, else extracted.
pub fn load_or_extract_case(
    dir: &Path,
    backend: &dyn AgentBackend,
) -> anyhow::Result<(StructuredCase, Vec<omgs_core::case::SourceDocument>, Vec<UsageRecord>)> {
    let record = load_case_packet(dir)?;
    let stored = dir.join(STRUCTURED_CASE);
    if stored.exists() {
        let case = read_structured_case(&stored)?;
        if case.case_id != record.case_id {
            bail!("{}: case_id {} does not match packet {}", stored.display(), case.case_id, record.case_id);
        }
        return Ok((case, record.documents, Vec::new()));
    }
    let extraction = extract_case(&record, backend, DEFAULT_EXTRACTION_RETRIES);
    for s in &extraction.skipped {
        tracing::warn!(doc_id = %s.doc_id, reason = %s.reason, "document skipped during extraction");
    }
    let usage = extraction
        .usage
        .iter()
        .enumerate()
        .map(|(i, u)| UsageRecord {
            role: "extractor".into(),
            request: "extraction".into(),
            round: 0,
            attempt: i as u32,
            usage: *u,
        })
        .collect();
    let case = merge_extractions(&record, &extraction.partials);
    Ok((case, record.documents, usage))
}

fn failure_record(run_id: &str, f: &CaseFailure) -> FailureRecord {
    let (kind, violations, unresolved) = match &f.error {
        ProtocolError::Config(_) => ("config", vec![], vec![]),
        ProtocolError::InvalidCase(v) => ("invalid_case", v.clone(), vec![]),
        ProtocolError::Package(_) => ("package", vec![], vec![]),
        ProtocolError::Search(_) => ("search", vec![], vec![]),
        ProtocolError::Backend { .. } => ("backend", vec![], vec![]),
        ProtocolError::SummaryRejected {
            violations, unresolved, ..
        } => ("summary_rejected", violations.clone(), unresolved.clone()),
    };
    FailureRecord {
        run_id: run_id.to_string(),
        case_id: f.case_id.clone(),
        stage: f.stage.to_string(),
        kind: kind.into(),
        message: f.error.to_string(),
        violations,
        unresolved_citations: unresolved,
    }
}

/// Runs one case and persists its artifacts. Returns a report for both valid
/// and failed runs; `Err` only when the run could not be set up or written.
pub fn cmd_run(req: &RunRequest) -> anyhow::Result<RunReport> {
    let started = Utc::now();
    let clock = Instant::now();
    let config = req.effective_config();
    config.validate().map_err(|e| anyhow!("invalid config: {e}"))?;
    let snapshot = CorpusSnapshot::load(&req.snapshot).with_context(|| format!("loading snapshot {}", req.snapshot.display()))?;
    let embedder = open_embedder(snapshot.embedder_id(), snapshot.dimension(), req.embedder_url.as_deref())?;
    let backend = open_backend(&req.backend)?;
    let matrix = match &req.matrix {
        Some(p) => AccessMatrix::load(p)?,
        None => AccessMatrix::default(),
    };
    let (case, documents, extraction_usage) = load_or_extract_case(&req.case, backend.as_ref())
        .with_context(|| format!("loading case {}", req.case.display()))?;

    let backend_id = backend.backend_id().to_string();
    let run_id = match &req.run_id {
        Some(id) => id.clone(),
        None => derive_run_id(&case.case_id, &config, snapshot.snapshot_id(), &backend_id),
    };
    let run_dir = req.out.join(&run_id);
    if run_dir.exists() {
        if !req.force {
            bail!("run directory {} already exists", run_dir.display());
        }
        fs::remove_dir_all(&run_dir)?;
    }
    fs::create_dir_all(&run_dir)?;

    let inputs = CaseInputs {
        case: &case,
        documents: &documents,
        snapshot: &snapshot,
        embedder: embedder.as_ref(),
        matrix: &matrix,
    };
    let backends = Backends::single(backend.as_ref());
    let outcome = run_case(inputs, &backends, &config);

    let mut artifacts: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    artifacts.insert(CONFIG_FILE.into(), canonical_json(&config));
    artifacts.insert(CASE_FILE.into(), pretty(&case));
    let (transcript, mut ledger, summary, failure) = match outcome {
        Ok(o) => (Some(o.transcript), o.ledger, Some(o.summary), None),
        Err(f) => {
            let rec = failure_record(&run_id, &f);
            (f.transcript, f.ledger, None, Some(rec))
        }
    };
    ledger.extend(extraction_usage);
    if let Some(t) = &transcript {
        artifacts.insert(TRANSCRIPT_FILE.into(), t.to_jsonl().into_bytes());
    }
    if let Some(y) = &summary {
        let art = SummaryArtifact {
            run_id: run_id.clone(),
            case_id: case.case_id.clone(),
            mode: config.mode,
            summary: y.clone(),
        };
        artifacts.insert(SUMMARY_FILE.into(), pretty(&art));
    }
    if let Some(f) = &failure {
        artifacts.insert(FAILURE_FILE.into(), pretty(f));
    }
    artifacts.insert(
        USAGE_FILE.into(),
        pretty(&UsageArtifact {
            run_id: run_id.clone(),
            ledger: ledger.clone(),
        }),
    );
    for (name, bytes) in &artifacts {
        fs::write(run_dir.join(name), bytes)?;
    }

    // The exit-code contract is checked against the persisted summary.
    let mut failure = failure;
    if failure.is_none() {
        if let Some(problems) = persisted_summary_problems(&run_dir, &snapshot, &case, &config)? {
            let rec = FailureRecord {
                run_id: run_id.clone(),
                case_id: case.case_id.clone(),
                stage: "persist".into(),
                kind: "summary_invalid".into(),
                message: "persisted summary fails validation".into(),
                violations: problems,
                unresolved_citations: vec![],
            };
            let bytes = pretty(&rec);
            fs::write(run_dir.join(FAILURE_FILE), &bytes)?;
            artifacts.insert(FAILURE_FILE.into(), bytes);
            failure = Some(rec);
        }
    }

    let manifest = RunManifest {
        run_id: run_id.clone(),
        case_id: case.case_id.clone(),
        mode: config.mode,
        evidence_included: config.mode.includes_evidence(),
        dossier_included: config.mode.includes_dossier(),
        snapshot_id: snapshot.snapshot_id().to_string(),
        embedder_id: snapshot.embedder_id().to_string(),
        backend_id,
        config_hash: config.config_hash(),
        seeds: BTreeMap::from([("deliberation".to_string(), config.seed)]),
        status: if failure.is_none() { RunStatus::Valid } else { RunStatus::Failed },
        failure_stage: failure.as_ref().map(|f| f.stage.clone()),
        usage: ledger.totals,
        artifacts: artifacts
            .iter()
            .map(|(k, v)| (k.clone(), format!("sha256:{}", sha256_hex(v))))
            .collect(),
        volatile: Volatile {
            started_at: started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            elapsed_ms: clock.elapsed().as_millis() as u64,
        },
    };
    fs::write(run_dir.join(MANIFEST_FILE), pretty(&manifest))?;
    tracing::info!(run_id = %run_id, status = ?manifest.status, "run finished");
    Ok(RunReport {
        run_dir,
        manifest,
        failure,
    })
}

/// `None` when `summary.json` parses and validates; otherwise the problems.
fn persisted_summary_problems(
    run_dir: &Path,
    snapshot: &CorpusSnapshot,
    case: &StructuredCase,
    config: &DeliberationConfig,
) -> anyhow::Result<Option<Vec<String>>> {
    let bytes = fs::read(run_dir.join(SUMMARY_FILE))?;
    let art: SummaryArtifact = match serde_json::from_slice(&bytes) {
        Ok(a) => a,
        Err(e) => return Ok(Some(vec![format!("summary.json: {e}")])),
    };
    let report = validate_decision_summary(&art.summary, snapshot, case, &config.output_template);
    Ok((!report.is_valid()).then(|| {
        report
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.section, v.message))
            .collect()
    }))
}

pub fn read_manifest(path: &Path) -> anyhow::Result<RunManifest> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", file.display()))
}

/// JSON written to stdout after a run.
pub fn run_summary_json(report: &RunReport) -> serde_json::Value {
    json!({
        "run_id": report.manifest.run_id,
        "run_dir": report.run_dir,
        "status": report.manifest.status,
        "failure": report.failure,
    })
}
