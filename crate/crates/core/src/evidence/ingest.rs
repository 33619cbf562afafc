//! Corpus ingestion, normalization, deduplication and entry construction.
//!
//! Input is JSONL with one `{stream, title, pmid?, text, meta?}` object per
//! line. A line that is not JSON aborts ingestion; a JSON object that does not
//! describe a usable record is skipped with a logged reason.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{chunk_text, ChunkConfig, EvidenceEntry, EvidenceRecord, EvidenceStream, EvidenceTier};
use crate::digest::FieldHasher;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read corpus file {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt JSONL line: {message}")]
    CorruptLine { path: PathBuf, line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub file: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<EvidenceRecord>,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputLine {
    #[serde(default)]
    stream: Option<EvidenceStream>,
    title: String,
    #[serde(default)]
    pmid: Option<Value>,
    text: String,
    #[serde(default)]
    meta: Option<Value>,
}

/// Reads corpus files in order. `default_stream` applies to lines that omit
/// `stream`.
pub fn ingest_corpus(paths: &[impl AsRef<Path>], default_stream: Option<EvidenceStream>) -> Result<IngestReport, IngestError> {
    let mut report = IngestReport::default();
    for path in paths {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|source| IngestError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        for (i, line) in content.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(line).map_err(|e| IngestError::CorruptLine {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
            let skip = |reason: String| {
                tracing::warn!(file = %path.display(), line = line_no, %reason, "skipping corpus record");
                SkippedRecord {
                    file: path.display().to_string(),
                    line: line_no,
                    reason,
                }
            };
            let input: InputLine = match serde_json::from_value(value) {
                Ok(v) => v,
                Err(e) => {
                    report.skipped.push(skip(e.to_string()));
                    continue;
                }
            };
            let Some(stream) = input.stream.or(default_stream) else {
                report.skipped.push(skip("missing stream".into()));
                continue;
            };
            if input.title.trim().is_empty() || input.text.trim().is_empty() {
                report.skipped.push(skip("empty title or text".into()));
                continue;
            }
            let pmid = match input.pmid {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) if s.trim().is_empty() => None,
                Some(Value::String(s)) => Some(s.trim().to_string()),
                Some(Value::Number(n)) => Some(n.to_string()),
                Some(other) => {
                    report.skipped.push(skip(format!("invalid pmid {other}")));
                    continue;
                }
            };
            report.records.push(EvidenceRecord {
                stream,
                title: input.title,
                pmid,
                text: input.text,
                meta: input.meta,
                tier: None,
            });
        }
    }
    Ok(report)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn meta_text(meta: &Option<Value>, out: &mut String) {
    fn walk(v: &Value, out: &mut String) {
        match v {
            Value::String(s) => {
                out.push(' ');
                out.push_str(s);
            }
            Value::Array(items) => items.iter().for_each(|i| walk(i, out)),
            Value::Object(map) => map.values().for_each(|i| walk(i, out)),
            _ => {}
        }
    }
    if let Some(m) = meta {
        walk(m, out);
    }
}

/// Keyword tier rules over title and metadata strings.
pub fn classify_tier(record: &EvidenceRecord) -> EvidenceTier {
    if record.stream == EvidenceStream::Guideline {
        return EvidenceTier::GuidelineText;
    }
    let mut text = record.title.clone();
    meta_text(&record.meta, &mut text);
    let text = text.to_lowercase();
    if text.contains("cochrane") || text.contains("systematic review") {
        EvidenceTier::SystematicReview
    } else if text.contains("meta-analysis") || text.contains("meta analysis") {
        EvidenceTier::MetaAnalysis
    } else if (text.contains("phase iii") || text.contains("phase 3")) && text.contains("randomi") {
        EvidenceTier::PhaseIiiRct
    } else if text.contains("cohort") {
        EvidenceTier::CohortStudy
    } else {
        EvidenceTier::Other
    }
}

/// Normalizes whitespace, assigns tiers, and collapses duplicates (same PMID,
/// or same normalized title and text). The first occurrence is kept.
pub fn dedup_normalize(records: Vec<EvidenceRecord>) -> Vec<EvidenceRecord> {
    let mut seen_pmids = HashSet::new();
    let mut seen_content = HashSet::new();
    let mut out = Vec::new();
    for mut r in records {
        r.title = collapse_whitespace(&r.title);
        r.text = collapse_whitespace(&r.text);
        r.pmid = r.pmid.map(|p| p.trim().to_string()).filter(|p| !p.is_empty());
        let content_key = (r.title.to_lowercase(), r.text.to_lowercase());
        if r.pmid.as_ref().is_some_and(|p| seen_pmids.contains(p)) || seen_content.contains(&content_key) {
            continue;
        }
        if let Some(p) = &r.pmid {
            seen_pmids.insert(p.clone());
        }
        seen_content.insert(content_key);
        r.tier = Some(classify_tier(&r));
        out.push(r);
    }
    out
}

/// `EB-` followed by the first 16 hex digits of the content hash of
/// (stream, title, chunk text).
pub fn entry_id(stream: EvidenceStream, title: &str, chunk_text: &str) -> String {
    let mut h = FieldHasher::new();
    h.str(stream.as_str()).str(title).str(chunk_text);
    format!("EB-{}", &h.finish_hex()[..16])
}

/// Chunks normalized records into entries without embeddings. Entries whose
/// id repeats an earlier one are dropped.
pub fn build_entries(records: &[EvidenceRecord], cfg: ChunkConfig) -> Vec<EvidenceEntry> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in records {
        let tier = r.tier.unwrap_or_else(|| classify_tier(r));
        for (i, chunk) in chunk_text(&r.text, cfg).into_iter().enumerate() {
            let id = entry_id(r.stream, &r.title, &chunk.text);
            if !seen.insert(id.clone()) {
                continue;
            }
            out.push(EvidenceEntry {
                entry_id: id,
                stream: r.stream,
                title: r.title.clone(),
                pmid: r.pmid.clone(),
                tier,
                chunk_index: i as u32,
                chunk_text: chunk.text,
                embedding: Vec::new(),
                corpus_version: String::new(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn rec(stream: EvidenceStream, title: &str, pmid: Option<&str>, text: &str) -> EvidenceRecord {
        EvidenceRecord {
            stream,
            title: title.into(),
            pmid: pmid.map(str::to_string),
            text: text.into(),
            meta: None,
            tier: None,
        }
    }

    #[test]
    fn three_articles_three_records() {
        let f = write_lines(&[
            r#"{"stream":"literature","title":"A","pmid":"1","text":"a"}"#,
            r#"{"stream":"literature","title":"B","pmid":2,"text":"b"}"#,
            r#"{"stream":"guideline","title":"C","text":"c"}"#,
        ]);
        let r = ingest_corpus(&[f.path()], None).unwrap();
        let titles: Vec<_> = r.records.iter().map(|r| r.title.as_str()).collect();
        assert_eq!(titles, ["A", "B", "C"]);
        assert_eq!(r.records[1].pmid.as_deref(), Some("2"));
        assert_eq!(r.records[2].pmid, None);
    }

    #[test]
    fn duplicates_survive_ingestion() {
        let line = r#"{"stream":"literature","title":"A","pmid":"1","text":"a"}"#;
        let f = write_lines(&[line, line]);
        assert_eq!(ingest_corpus(&[f.path()], None).unwrap().records.len(), 2);
    }

    #[test]
    fn malformed_record_skipped_corrupt_line_fatal() {
        let f = write_lines(&[
            r#"{"stream":"literature","title":"","text":"a"}"#,
            r#"{"stream":"literature","title":"ok","text":"a"}"#,
            r#"{"title":"no stream","text":"a"}"#,
        ]);
        let r = ingest_corpus(&[f.path()], None).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.skipped.iter().map(|s| s.line).collect::<Vec<_>>(), [1, 3]);

        let f = write_lines(&[r#"{"stream":"literature","title":"ok","text":"a"}"#, "{not json"]);
        match ingest_corpus(&[f.path()], None) {
            Err(IngestError::CorruptLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ingest_corpus(&[Path::new("/nonexistent/corpus.jsonl")], None),
            Err(IngestError::Unreadable { .. })
        ));
    }

    #[test]
    fn shared_pmid_collapses() {
        let out = dedup_normalize(vec![
            rec(EvidenceStream::Literature, "A", Some("77"), "one"),
            rec(EvidenceStream::Literature, "A (erratum)", Some("77"), "two"),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "one");
    }

    #[test]
    fn same_normalized_content_collapses() {
        let out = dedup_normalize(vec![
            rec(EvidenceStream::Literature, "Olaparib  maintenance", None, "Text\n here"),
            rec(EvidenceStream::Literature, "olaparib maintenance", None, "text here"),
        ]);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn tier_keyword_rules() {
        let t = |title: &str| classify_tier(&rec(EvidenceStream::Literature, title, None, "x"));
        assert_eq!(t("A randomised phase III trial of olaparib"), EvidenceTier::PhaseIiiRct);
        assert_eq!(t("Phase 3 randomized study"), EvidenceTier::PhaseIiiRct);
        assert_eq!(t("Phase III single-arm study"), EvidenceTier::Other);
        assert_eq!(t("Cochrane review of PARP inhibitors"), EvidenceTier::SystematicReview);
        assert_eq!(t("A systematic review and meta-analysis"), EvidenceTier::SystematicReview);
        assert_eq!(t("Meta-analysis of HIPEC"), EvidenceTier::MetaAnalysis);
        assert_eq!(t("Retrospective cohort of BRCA carriers"), EvidenceTier::CohortStudy);
        assert_eq!(
            classify_tier(&rec(EvidenceStream::Guideline, "NCCN ovarian cancer", None, "x")),
            EvidenceTier::GuidelineText
        );
        let mut r = rec(EvidenceStream::Literature, "Olaparib trial", None, "x");
        r.meta = Some(serde_json::json!({"publication_type": ["Randomized Controlled Trial", "Phase III"]}));
        assert_eq!(classify_tier(&r), EvidenceTier::PhaseIiiRct);
    }

    #[test]
    fn entry_ids_are_content_hashes() {
        let a = entry_id(EvidenceStream::Literature, "T", "chunk");
        assert_eq!(a, entry_id(EvidenceStream::Literature, "T", "chunk"));
        assert_ne!(a, entry_id(EvidenceStream::Guideline, "T", "chunk"));
        assert_ne!(a, entry_id(EvidenceStream::Literature, "T", "chunk."));
        assert!(a.starts_with("EB-") && a.len() == 19);
    }

    proptest! {
        #[test]
        fn dedup_is_idempotent(
            items in proptest::collection::vec(
                (proptest::option::of("[0-9]{1,2}"), "[a-c ]{0,6}", "[a-c \n]{1,8}", any::<bool>()),
                0..30,
            )
        ) {
            let records: Vec<_> = items
                .into_iter()
                .map(|(pmid, title, text, g)| {
                    let stream = if g { EvidenceStream::Guideline } else { EvidenceStream::Literature };
                    rec(stream, &title, pmid.as_deref(), &text)
                })
                .collect();
            let once = dedup_normalize(records);
            let twice = dedup_normalize(once.clone());
            prop_assert_eq!(once, twice);
        }
    }
}
