use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::{Deserialize, Serialize};

use omgs_core::evidence::{
    build_entries, dedup_normalize, embed_entries, freeze_snapshot, ingest_corpus, ChunkConfig, Embedder, EvidenceStream,
    SkippedRecord, TokenHashEmbedder,
};

use crate::backend_spec::open_embedder;

/// Snapshot build settings; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub chunk: ChunkConfig,
    pub dimension: usize,
    pub phase_label: String,
    pub default_stream: Option<EvidenceStream>,
    /// Remote embedder as `{id, url}`; the local hash-bag embedder otherwise.
    pub embedder: Option<RemoteEmbedder>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEmbedder {
    pub id: String,
    pub url: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            chunk: ChunkConfig::default(),
            dimension: TokenHashEmbedder::DEFAULT_DIMENSION,
            phase_label: String::new(),
            default_stream: None,
            embedder: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub corpus: Vec<PathBuf>,
    pub out: PathBuf,
    #[serde(default)]
    pub config: IngestConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub snapshot_id: String,
    pub snapshot_dir: PathBuf,
    pub embedder_id: String,
    pub records: usize,
    pub entries: usize,
    pub skipped: Vec<SkippedRecord>,
}

fn stage<T, E: std::fmt::Display>(name: &str, r: Result<T, E>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow!("ingest aborted at stage {name}: {e}"))
}

/// ingest, dedup, chunk, embed, freeze, save.
pub fn cmd_ingest(req: &IngestRequest) -> anyhow::Result<IngestSummary> {
    let cfg = &req.config;
    if req.corpus.is_empty() {
        return stage("ingest", Err("no corpus files given"));
    }
    let report = stage("ingest", ingest_corpus(&req.corpus, cfg.default_stream))?;
    let records = dedup_normalize(report.records);
    if cfg.chunk.size == 0 || cfg.chunk.overlap >= cfg.chunk.size {
        return stage("chunk", Err("chunk overlap must be smaller than a positive chunk size"));
    }
    let mut entries = build_entries(&records, cfg.chunk);
    let embedder: Box<dyn Embedder> = match &cfg.embedder {
        None => Box::new(TokenHashEmbedder::new(cfg.dimension)),
        Some(r) => stage("embed", open_embedder(&r.id, cfg.dimension, Some(&r.url)))?,
    };
    stage("embed", embed_entries(&mut entries, embedder.as_ref()))?;
    let snapshot = stage(
        "freeze",
        freeze_snapshot(entries, embedder.embedder_id(), cfg.dimension, &cfg.phase_label),
    )?;
    stage("save", snapshot.save(&req.out))?;
    Ok(IngestSummary {
        snapshot_id: snapshot.snapshot_id().to_string(),
        snapshot_dir: req.out.clone(),
        embedder_id: snapshot.embedder_id().to_string(),
        records: records.len(),
        entries: snapshot.len(),
        skipped: report.skipped,
    })
}

pub fn load_ingest_config(path: Option<&Path>) -> anyhow::Result<IngestConfig> {
    match path {
        None => Ok(IngestConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| anyhow!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", p.display()))
        }
    }
}
