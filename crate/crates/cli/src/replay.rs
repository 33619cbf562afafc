use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use omgs_core::case::packet::read_structured_case;
use omgs_core::deliberation::{replay_transcript, DeliberationConfig};
use omgs_core::evidence::CorpusSnapshot;

use crate::run::{read_manifest, SummaryArtifact, CASE_FILE, CONFIG_FILE, SUMMARY_FILE, TRANSCRIPT_FILE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRequest {
    pub run: PathBuf,
    pub snapshot: PathBuf,
    /// Config to replay under; the run's own `config.json` by default.
    #[serde(default)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub run_id: String,
    pub case_id: String,
    pub summary_matches: bool,
}

/// Re-derives the run's summary from its transcript, without a backend, and
/// compares it with the persisted `summary.json`.
pub fn cmd_replay(req: &ReplayRequest) -> anyhow::Result<ReplayReport> {
    let manifest = read_manifest(&req.run)?;
    let config_path = req.config.clone().unwrap_or_else(|| req.run.join(CONFIG_FILE));
    let config: DeliberationConfig = serde_json::from_slice(&fs::read(&config_path)?)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let case = read_structured_case(&req.run.join(CASE_FILE))?;
    let snapshot = CorpusSnapshot::load(&req.snapshot)?;
    let jsonl = fs::read_to_string(req.run.join(TRANSCRIPT_FILE)).context("reading transcript")?;
    let replayed = replay_transcript(&jsonl, &config, &snapshot, &case)?;
    let summary_path = req.run.join(SUMMARY_FILE);
    if !summary_path.exists() {
        bail!("run {} has no summary to compare against", manifest.run_id);
    }
    let persisted: SummaryArtifact = serde_json::from_slice(&fs::read(&summary_path)?)?;
    Ok(ReplayReport {
        run_id: manifest.run_id,
        case_id: case.case_id,
        summary_matches: persisted.summary == replayed,
    })
}
