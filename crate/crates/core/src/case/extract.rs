//! Per-document fact extraction through an agent backend.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    FieldValue, FigoStage, HistologyGroup, PrimaryStrategy, Provenance, RawCaseRecord, SourceDocument,
    TreatmentLine, UNKNOWN,
};
use crate::backend::{generate_with_retries, AgentBackend, BackendError, GenerateRequest, RequestMeta, Usage};

pub const EXTRACTION_SCHEMA_ID: &str = "case_extraction.v1";
pub const EXTRACTOR_ROLE: &str = "extractor";
/// Schema-violation retries per document.
pub const DEFAULT_EXTRACTION_RETRIES: u32 = 2;

pub const FIELD_AGE: &str = "age";
pub const FIELD_HISTOLOGY: &str = "histology_group";
pub const FIELD_STAGE: &str = "figo_stage";
pub const FIELD_STRATEGY: &str = "primary_strategy";
pub const FIELD_PFI: &str = "platinum_free_interval_months";
pub const BIOMARKER_PREFIX: &str = "biomarker:";

const INSTRUCTION: &str = "Extract only facts stated explicitly in the document. \
Return one JSON object conforming to case_extraction.v1. Omit fields the document does not mention; \
use \"Unknown\" only when the document mentions a field without a definitive value. Never infer or impute.";

/// Facts extracted from one document. Scalar fields are keyed by schema name
/// (`biomarker:<NAME>` for biomarkers); absent keys were not mentioned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialExtraction {
    pub doc: Provenance,
    pub fields: BTreeMap<String, FieldValue>,
    pub treatments: Vec<TreatmentLine>,
    pub event_flags: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error("document {doc_id} has an empty body")]
    EmptyBody { doc_id: String },
    #[error("document {doc_id}: extractor output violated {EXTRACTION_SCHEMA_ID} after {} attempt(s): {}", raw_outputs.len(), violations.join("; "))]
    SchemaViolation {
        doc_id: String,
        violations: Vec<String>,
        /// Every raw output received, kept for audit.
        raw_outputs: Vec<Value>,
        usage: Vec<Usage>,
    },
    #[error("document {doc_id}: {source}")]
    Backend {
        doc_id: String,
        #[source]
        source: BackendError,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireExtraction {
    #[serde(default)]
    age: Option<Value>,
    #[serde(default)]
    histology_group: Option<Value>,
    #[serde(default)]
    figo_stage: Option<Value>,
    #[serde(default)]
    primary_strategy: Option<Value>,
    #[serde(default)]
    platinum_free_interval_months: Option<Value>,
    #[serde(default)]
    biomarkers: BTreeMap<String, Value>,
    #[serde(default)]
    treatments: Vec<WireTreatment>,
    #[serde(default)]
    event_flags: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTreatment {
    therapy: String,
    start: NaiveDate,
    #[serde(default)]
    end: Option<NaiveDate>,
    line: u32,
    #[serde(default)]
    platinum: Option<bool>,
}

/// Validates and normalizes one raw extractor output against the schema.
pub fn parse_extraction(doc: &SourceDocument, raw: &Value) -> Result<PartialExtraction, Vec<String>> {
    let wire: WireExtraction = serde_json::from_value(raw.clone()).map_err(|e| vec![e.to_string()])?;
    let prov = doc.provenance();
    let mut errors = Vec::new();
    let mut fields = BTreeMap::new();

    let mut scalar = |name: &str, value: Option<Value>, check: &dyn Fn(&str) -> Option<String>| {
        let Some(value) = value else { return };
        let text = match &value {
            Value::String(s) => s.trim().to_string(),
            Value::Number(n) => n.to_string(),
            Value::Null => UNKNOWN.to_string(),
            other => {
                errors.push(format!("{name}: expected string or number, got {other}"));
                return;
            }
        };
        if text == UNKNOWN {
            fields.insert(name.to_string(), FieldValue::unknown());
            return;
        }
        match check(&text) {
            Some(canonical) => {
                fields.insert(name.to_string(), FieldValue::known(canonical, vec![prov.clone()]));
            }
            None => errors.push(format!("{name}: invalid value {text:?}")),
        }
    };

    scalar(FIELD_AGE, wire.age, &|t| {
        t.parse::<u32>().ok().filter(|a| *a <= 130).map(|a| a.to_string())
    });
    scalar(FIELD_HISTOLOGY, wire.histology_group, &|t| {
        HistologyGroup::parse(t).map(|h| h.code().to_string())
    });
    scalar(FIELD_STAGE, wire.figo_stage, &|t| FigoStage::parse(t).map(|s| s.code().to_string()));
    scalar(FIELD_STRATEGY, wire.primary_strategy, &|t| {
        PrimaryStrategy::parse(t).map(|s| s.code().to_string())
    });
    scalar(FIELD_PFI, wire.platinum_free_interval_months, &|t| {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .map(|v| v.to_string())
    });
    for (marker, value) in wire.biomarkers {
        let name = format!("{BIOMARKER_PREFIX}{}", marker.trim());
        scalar(&name, Some(value), &|t| (!t.is_empty()).then(|| t.to_string()));
    }

    let mut treatments = Vec::new();
    for t in wire.treatments {
        if t.therapy.trim().is_empty() {
            errors.push("treatments: empty therapy label".into());
            continue;
        }
        if t.end.is_some_and(|end| end < t.start) {
            errors.push(format!("treatments: {} ends before it starts", t.therapy));
            continue;
        }
        let platinum = t.platinum.unwrap_or_else(|| t.therapy.to_lowercase().contains("platin"));
        treatments.push(TreatmentLine {
            therapy: t.therapy.trim().to_string(),
            start: t.start,
            end: t.end,
            line: t.line,
            platinum,
            provenance: vec![prov.clone()],
        });
    }

    let mut event_flags = BTreeSet::new();
    for flag in wire.event_flags {
        let flag = flag.trim().to_string();
        if flag.is_empty() {
            errors.push("event_flags: empty flag".into());
        } else {
            event_flags.insert(flag);
        }
    }

    if errors.is_empty() {
        Ok(PartialExtraction {
            doc: prov,
            fields,
            treatments,
            event_flags,
        })
    } else {
        Err(errors)
    }
}

/// Extracts one document, re-prompting with the violation list up to
/// `retry_budget` times when the output does not conform to the schema.
pub fn extract_document(
    doc: &SourceDocument,
    extractor: &dyn AgentBackend,
    case_id: &str,
    retry_budget: u32,
) -> Result<(PartialExtraction, Vec<Usage>), ExtractionError> {
    if doc.body.trim().is_empty() {
        return Err(ExtractionError::EmptyBody {
            doc_id: doc.doc_id.clone(),
        });
    }
    let context = json!({
        "document": {
            "doc_id": doc.doc_id,
            "doc_type": doc.doc_type,
            "doc_date": doc.doc_date,
            "body": doc.body,
        }
    });
    let mut instruction = INSTRUCTION.to_string();
    let mut raw_outputs = Vec::new();
    let mut usage = Vec::new();
    let mut violations = Vec::new();
    for attempt in 0..=retry_budget {
        let request = GenerateRequest {
            role: EXTRACTOR_ROLE.into(),
            instruction: instruction.clone(),
            context: context.clone(),
            schema_id: EXTRACTION_SCHEMA_ID.into(),
            meta: RequestMeta {
                case_id: case_id.to_string(),
                kind: "extraction".into(),
                round: 0,
                attempt,
                seed: 0,
            },
        };
        let response = generate_with_retries(extractor, &request, 0).map_err(|source| ExtractionError::Backend {
            doc_id: doc.doc_id.clone(),
            source,
        })?;
        usage.push(response.usage);
        match parse_extraction(doc, &response.message) {
            Ok(partial) => return Ok((partial, usage)),
            Err(errs) => {
                raw_outputs.push(response.message);
                instruction = format!(
                    "{INSTRUCTION}\n\nYour previous output was rejected for these schema violations:\n- {}",
                    errs.join("\n- ")
                );
                violations = errs;
            }
        }
    }
    Err(ExtractionError::SchemaViolation {
        doc_id: doc.doc_id.clone(),
        violations,
        raw_outputs,
        usage,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedDocument {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct CaseExtraction {
    pub partials: Vec<PartialExtraction>,
    pub skipped: Vec<SkippedDocument>,
    pub usage: Vec<Usage>,
}

/// Extracts every document available at decision time. Documents are
/// extracted concurrently; failures are logged and skipped, never fatal.
pub fn extract_case(record: &RawCaseRecord, extractor: &dyn AgentBackend, retry_budget: u32) -> CaseExtraction {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = record
            .documents
            .iter()
            .map(|doc| {
                scope.spawn(move || {
                    if doc.doc_date > record.index_mdt_date {
                        return Err((
                            SkippedDocument {
                                doc_id: doc.doc_id.clone(),
                                reason: "dated after index MDT date".into(),
                            },
                            Vec::new(),
                        ));
                    }
                    extract_document(doc, extractor, &record.case_id, retry_budget).map_err(|e| {
                        let usage = match &e {
                            ExtractionError::SchemaViolation { usage, .. } => usage.clone(),
                            _ => Vec::new(),
                        };
                        (
                            SkippedDocument {
                                doc_id: doc.doc_id.clone(),
                                reason: e.to_string(),
                            },
                            usage,
                        )
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("extraction thread panicked")).collect()
    });

    let mut out = CaseExtraction::default();
    for result in results {
        match result {
            Ok((partial, usage)) => {
                out.partials.push(partial);
                out.usage.extend(usage);
            }
            Err((skipped, usage)) => {
                tracing::warn!(doc_id = %skipped.doc_id, reason = %skipped.reason, "document skipped");
                out.skipped.push(skipped);
                out.usage.extend(usage);
            }
        }
    }
    out
}
