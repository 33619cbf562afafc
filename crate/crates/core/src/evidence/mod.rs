//! Two-stream evidence bank: ingestion, chunking, embedding, deduplication,
//! frozen content-addressed snapshots, and cosine retrieval.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::case::{Provenance, StructuredCase};

mod chunk;
mod embed;
mod ingest;
mod query;
mod search;
mod snapshot;

pub use chunk::{chunk_text, Chunk, ChunkConfig};
pub use embed::{cosine, embed, fnv1a64, EmbedError, Embedder, HttpEmbedder, TokenHashEmbedder};
pub use ingest::{build_entries, classify_tier, dedup_normalize, ingest_corpus, IngestError, IngestReport, SkippedRecord};
pub use query::{build_query, build_query_with, EvidenceQuery, QueryTemplate, GENERIC_DISEASE_TERM};
pub use search::{brute_force_rank, search, search_filtered, search_vector, SearchError, SearchHit};
pub use snapshot::{embed_entries, freeze_snapshot, CorpusSnapshot, SnapshotError, SnapshotManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceStream {
    #[serde(rename = "guideline", alias = "Guideline")]
    Guideline,
    #[serde(rename = "literature", alias = "Literature")]
    Literature,
}

impl EvidenceStream {
    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceStream::Guideline => "guideline",
            EvidenceStream::Literature => "literature",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceTier {
    SystematicReview,
    MetaAnalysis,
    #[serde(rename = "PhaseIIIRCT")]
    PhaseIiiRct,
    CohortStudy,
    GuidelineText,
    Other,
}

impl EvidenceTier {
    fn as_str(self) -> &'static str {
        match self {
            EvidenceTier::SystematicReview => "SystematicReview",
            EvidenceTier::MetaAnalysis => "MetaAnalysis",
            EvidenceTier::PhaseIiiRct => "PhaseIIIRCT",
            EvidenceTier::CohortStudy => "CohortStudy",
            EvidenceTier::GuidelineText => "GuidelineText",
            EvidenceTier::Other => "Other",
        }
    }
}

/// One article or guideline section, before chunking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub stream: EvidenceStream,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmid: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
    /// Assigned by [`dedup_normalize`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<EvidenceTier>,
}

/// A citable chunk of evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub entry_id: String,
    pub stream: EvidenceStream,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmid: Option<String>,
    pub tier: EvidenceTier,
    pub chunk_index: u32,
    pub chunk_text: String,
    pub embedding: Vec<f32>,
    /// Snapshot id of the snapshot holding this entry; empty before freezing.
    #[serde(default)]
    pub corpus_version: String,
}

/// What a citation id points at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Resolution<'a> {
    Evidence(&'a EvidenceEntry),
    PatientReport(&'a Provenance),
    Unresolved,
}

impl Resolution<'_> {
    pub fn is_resolved(&self) -> bool {
        !matches!(self, Resolution::Unresolved)
    }
}

/// Exact-match lookup: snapshot entry ids first, then the case's document ids.
pub fn resolve_citation<'a>(id: &str, snapshot: &'a CorpusSnapshot, case: &'a StructuredCase) -> Resolution<'a> {
    if let Some(entry) = snapshot.entry(id) {
        return Resolution::Evidence(entry);
    }
    match case.document(id) {
        Some(p) => Resolution::PatientReport(p),
        None => Resolution::Unresolved,
    }
}
