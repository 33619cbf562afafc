//! Frozen, content-addressed corpus snapshots.
//!
//! On disk a snapshot is a directory holding `manifest.json` and
//! `entries.jsonl`; embeddings are base64 of little-endian `f32`s. Loading
//! recomputes the snapshot id and refuses a directory whose content no longer
//! matches its manifest.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{embed, EmbedError, Embedder, EvidenceEntry, EvidenceStream, EvidenceTier};
use crate::digest::FieldHasher;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENTRIES_FILE: &str = "entries.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("entry {entry_id}: embedding dimension {got}, snapshot dimension {expected}")]
    DimensionMismatch {
        entry_id: String,
        expected: usize,
        got: usize,
    },
    #[error("snapshot dimension must be positive")]
    ZeroDimension,
    #[error("duplicate entry id {0}")]
    DuplicateEntry(String),
    #[error("snapshot directory {0} already exists; snapshots are immutable")]
    AlreadyExists(PathBuf),
    #[error("snapshot at {path} has id {actual}, manifest says {recorded}")]
    IdMismatch {
        path: PathBuf,
        recorded: String,
        actual: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub snapshot_id: String,
    pub embedder_id: String,
    pub dimension: usize,
    pub phase_label: String,
    pub entry_count: usize,
}

/// Immutable evidence collection. Entries are ordered by `entry_id`.
#[derive(Clone, Debug)]
pub struct CorpusSnapshot {
    snapshot_id: String,
    phase_label: String,
    embedder_id: String,
    dimension: usize,
    entries: Vec<EvidenceEntry>,
    index: HashMap<String, usize>,
}

/// Fills in embeddings for `entries` using `embedder`.
pub fn embed_entries(entries: &mut [EvidenceEntry], embedder: &dyn Embedder) -> Result<(), EmbedError> {
    const BATCH: usize = 64;
    for batch in entries.chunks_mut(BATCH) {
        let texts: Vec<&str> = batch.iter().map(|e| e.chunk_text.as_str()).collect();
        let vectors = embed(&texts, embedder)?;
        for (entry, v) in batch.iter_mut().zip(vectors) {
            entry.embedding = v;
        }
    }
    Ok(())
}

fn compute_id(embedder_id: &str, dimension: usize, entries: &[EvidenceEntry]) -> String {
    let mut h = FieldHasher::new();
    h.str("omgs-snapshot/v1").str(embedder_id).field(&(dimension as u64).to_le_bytes());
    for e in entries {
        h.str(&e.entry_id)
            .str(e.stream.as_str())
            .str(&e.title)
            .str(e.pmid.as_deref().unwrap_or(""))
            .str(e.tier.as_str())
            .field(&e.chunk_index.to_le_bytes())
            .str(&e.chunk_text)
            .field(&embedding_bytes(&e.embedding));
    }
    format!("sha256:{}", h.finish_hex())
}

fn embedding_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

/// Freezes embedded entries. The snapshot id depends on the entries and the
/// embedder only, not on the phase label or input order.
pub fn freeze_snapshot(
    mut entries: Vec<EvidenceEntry>,
    embedder_id: &str,
    dimension: usize,
    phase_label: &str,
) -> Result<CorpusSnapshot, SnapshotError> {
    if dimension == 0 {
        return Err(SnapshotError::ZeroDimension);
    }
    entries.sort_by(|a, b| a.entry_id.cmp(&b.entry_id));
    for e in &entries {
        if e.embedding.len() != dimension {
            return Err(SnapshotError::DimensionMismatch {
                entry_id: e.entry_id.clone(),
                expected: dimension,
                got: e.embedding.len(),
            });
        }
    }
    if let Some(w) = entries.windows(2).find(|w| w[0].entry_id == w[1].entry_id) {
        return Err(SnapshotError::DuplicateEntry(w[0].entry_id.clone()));
    }
    let snapshot_id = compute_id(embedder_id, dimension, &entries);
    for e in &mut entries {
        e.corpus_version = snapshot_id.clone();
    }
    let index = entries.iter().enumerate().map(|(i, e)| (e.entry_id.clone(), i)).collect();
    Ok(CorpusSnapshot {
        snapshot_id,
        phase_label: phase_label.to_string(),
        embedder_id: embedder_id.to_string(),
        dimension,
        entries,
        index,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredEntry {
    entry_id: String,
    stream: EvidenceStream,
    title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pmid: Option<String>,
    tier: EvidenceTier,
    chunk_index: u32,
    chunk_text: String,
    embedding: String,
}

impl CorpusSnapshot {
    pub fn snapshot_id(&self) -> &str {
        &self.snapshot_id
    }

    pub fn phase_label(&self) -> &str {
        &self.phase_label
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[EvidenceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, entry_id: &str) -> Option<&EvidenceEntry> {
        self.index.get(entry_id).map(|i| &self.entries[*i])
    }

    pub fn manifest(&self) -> SnapshotManifest {
        SnapshotManifest {
            snapshot_id: self.snapshot_id.clone(),
            embedder_id: self.embedder_id.clone(),
            dimension: self.dimension,
            phase_label: self.phase_label.clone(),
            entry_count: self.entries.len(),
        }
    }

    /// Writes the snapshot into a new directory. Refuses to touch an existing one.
    pub fn save(&self, dir: &Path) -> Result<(), SnapshotError> {
        if dir.exists() {
            return Err(SnapshotError::AlreadyExists(dir.to_path_buf()));
        }
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SnapshotError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut manifest = serde_json::to_vec_pretty(&self.manifest()).expect("manifest serializes");
        manifest.push(b'\n');
        fs::write(&manifest_path, manifest).map_err(io(&manifest_path))?;

        let entries_path = dir.join(ENTRIES_FILE);
        let mut out = std::io::BufWriter::new(fs::File::create(&entries_path).map_err(io(&entries_path))?);
        for e in &self.entries {
            let stored = StoredEntry {
                entry_id: e.entry_id.clone(),
                stream: e.stream,
                title: e.title.clone(),
                pmid: e.pmid.clone(),
                tier: e.tier,
                chunk_index: e.chunk_index,
                chunk_text: e.chunk_text.clone(),
                embedding: B64.encode(embedding_bytes(&e.embedding)),
            };
            serde_json::to_writer(&mut out, &stored).expect("entry serializes");
            out.write_all(b"\n").map_err(io(&entries_path))?;
        }
        out.flush().map_err(io(&entries_path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SnapshotError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let format = |path: &Path, message: String| SnapshotError::Format {
            path: path.to_path_buf(),
            message,
        };
        let bytes = fs::read(&manifest_path).map_err(|source| SnapshotError::Io {
            path: manifest_path.clone(),
            source,
        })?;
        let manifest: SnapshotManifest =
            serde_json::from_slice(&bytes).map_err(|e| format(&manifest_path, e.to_string()))?;

        let entries_path = dir.join(ENTRIES_FILE);
        let content = fs::read_to_string(&entries_path).map_err(|source| SnapshotError::Io {
            path: entries_path.clone(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let stored: StoredEntry = serde_json::from_str(line)
                .map_err(|e| format(&entries_path, format!("line {}: {e}", i + 1)))?;
            let raw = B64
                .decode(&stored.embedding)
                .map_err(|e| format(&entries_path, format!("line {}: {e}", i + 1)))?;
            if raw.len() % 4 != 0 {
                return Err(format(&entries_path, format!("line {}: truncated embedding", i + 1)));
            }
            let embedding = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            entries.push(EvidenceEntry {
                entry_id: stored.entry_id,
                stream: stored.stream,
                title: stored.title,
                pmid: stored.pmid,
                tier: stored.tier,
                chunk_index: stored.chunk_index,
                chunk_text: stored.chunk_text,
                embedding,
                corpus_version: String::new(),
            });
        }
        let snapshot = freeze_snapshot(entries, &manifest.embedder_id, manifest.dimension, &manifest.phase_label)?;
        if snapshot.snapshot_id != manifest.snapshot_id {
            return Err(SnapshotError::IdMismatch {
                path: dir.to_path_buf(),
                recorded: manifest.snapshot_id,
                actual: snapshot.snapshot_id,
            });
        }
        Ok(snapshot)
    }
}
