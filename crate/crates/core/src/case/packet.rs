//! On-disk case packets.
//!
//! ```text
//! <case dir>/
//!   case.meta.json          {case_id, index_mdt_date, centre_id}
//!   <doc>.meta.json         {doc_id, doc_type, doc_date, centre_id?, nuclear?, tags?}
//!   <doc>.txt               UTF-8 document body
//!   structured_case.json    merged output (written by the pipeline)
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DocType, RawCaseRecord, SourceDocument, StructuredCase};

pub const CASE_META: &str = "case.meta.json";
pub const STRUCTURED_CASE: &str = "structured_case.json";

#[derive(Debug, thiserror::Error)]
pub enum PacketError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseMeta {
    case_id: String,
    index_mdt_date: NaiveDate,
    #[serde(default)]
    centre_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocMeta {
    doc_id: String,
    doc_type: DocType,
    doc_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centre_id: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    nuclear: bool,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    tags: BTreeSet<String>,
}

fn read(path: &Path) -> Result<Vec<u8>, PacketError> {
    fs::read(path).map_err(|source| PacketError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PacketError> {
    serde_json::from_slice(&read(path)?).map_err(|source| PacketError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), PacketError> {
    fs::write(path, bytes).map_err(|source| PacketError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a packet; documents are ordered by `doc_id`.
pub fn load_case_packet(dir: &Path) -> Result<RawCaseRecord, PacketError> {
    let meta: CaseMeta = read_json(&dir.join(CASE_META))?;
    let entries = fs::read_dir(dir).map_err(|source| PacketError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut documents = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| PacketError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_suffix(".meta.json") else { continue };
        if name == CASE_META {
            continue;
        }
        let doc: DocMeta = read_json(&path)?;
        let body_path = dir.join(format!("{stem}.txt"));
        let body = String::from_utf8(read(&body_path)?)
            .map_err(|_| PacketError::Invalid(format!("{}: body is not UTF-8", body_path.display())))?;
        documents.push(SourceDocument {
            doc_id: doc.doc_id,
            doc_type: doc.doc_type,
            doc_date: doc.doc_date,
            centre_id: doc.centre_id.unwrap_or_else(|| meta.centre_id.clone()),
            nuclear: doc.nuclear,
            tags: doc.tags,
            body,
        });
    }
    documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if documents.is_empty() {
        return Err(PacketError::Invalid(format!("{}: case packet has no documents", dir.display())));
    }
    if let Some(dup) = documents.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(PacketError::Invalid(format!("duplicate doc_id {}", dup[0].doc_id)));
    }
    Ok(RawCaseRecord {
        case_id: meta.case_id,
        index_mdt_date: meta.index_mdt_date,
        centre_id: meta.centre_id,
        documents,
    })
}

/// Writes `record` as a packet; file stems are the doc ids.
pub fn write_case_packet(record: &RawCaseRecord, dir: &Path) -> Result<(), PacketError> {
    fs::create_dir_all(dir).map_err(|source| PacketError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let meta = CaseMeta {
        case_id: record.case_id.clone(),
        index_mdt_date: record.index_mdt_date,
        centre_id: record.centre_id.clone(),
    };
    write(&dir.join(CASE_META), &pretty(&meta))?;
    for doc in &record.documents {
        let meta = DocMeta {
            doc_id: doc.doc_id.clone(),
            doc_type: doc.doc_type,
            doc_date: doc.doc_date,
            centre_id: (doc.centre_id != record.centre_id).then(|| doc.centre_id.clone()),
            nuclear: doc.nuclear,
            tags: doc.tags.clone(),
        };
        write(&dir.join(format!("{}.meta.json", doc.doc_id)), &pretty(&meta))?;
        write(&dir.join(format!("{}.txt", doc.doc_id)), doc.body.as_bytes())?;
    }
    Ok(())
}

pub fn write_structured_case(case: &StructuredCase, path: &Path) -> Result<(), PacketError> {
    write(path, &pretty(case))
}

pub fn read_structured_case(path: &Path) -> Result<StructuredCase, PacketError> {
    read_json(path)
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}
