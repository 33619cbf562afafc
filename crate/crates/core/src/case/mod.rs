//! Schema-normalized case representation with document-level provenance.
//!
//! Raw packets ([`RawCaseRecord`]) are turned into per-document partial
//! extractions ([`extract`]), which are merged by modality- and time-based
//! precedence ([`merge`]) into a [`StructuredCase`]. Nothing is imputed:
//! a field no document supports is carried as [`Field::unknown`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub mod extract;
pub mod merge;
pub mod packet;
pub mod scene;
pub mod validate;

pub use extract::{extract_case, extract_document, ExtractionError, PartialExtraction};
pub use merge::{merge_extractions, merge_extractions_with};
pub use scene::{assign_scene, SceneRuleTable};
pub use validate::{validate_case, CaseViolation};

/// Textual sentinel for values no source document supports.
pub const UNKNOWN: &str = "Unknown";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DocType {
    Pathology,
    Imaging,
    Laboratory,
    Genomic,
    Operative,
    ClinicalNote,
    MdtNote,
}

impl DocType {
    pub const ALL: [DocType; 7] = [
        DocType::Pathology,
        DocType::Imaging,
        DocType::Laboratory,
        DocType::Genomic,
        DocType::Operative,
        DocType::ClinicalNote,
        DocType::MdtNote,
    ];
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub doc_type: DocType,
    pub doc_date: NaiveDate,
    pub centre_id: String,
    /// PET / nuclear-medicine report within the Imaging modality.
    #[serde(default)]
    pub nuclear: bool,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub tags: BTreeSet<String>,
    pub body: String,
}

impl SourceDocument {
    /// `nuclear` is exposed as a tag so access rules can key on it uniformly.
    pub fn has_tag(&self, tag: &str) -> bool {
        (tag == "nuclear" && self.nuclear) || self.tags.contains(tag)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            doc_id: self.doc_id.clone(),
            doc_type: self.doc_type,
            doc_date: self.doc_date,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCaseRecord {
    pub case_id: String,
    pub index_mdt_date: NaiveDate,
    #[serde(default)]
    pub centre_id: String,
    pub documents: Vec<SourceDocument>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub doc_id: String,
    pub doc_type: DocType,
    pub doc_date: NaiveDate,
}

/// A value that is either supported by at least one document or `Unknown`.
///
/// Serialized as `{"value": <v>|"Unknown", "provenance": [...]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub value: Option<T>,
    pub provenance: Vec<Provenance>,
}

/// String-valued field as produced by per-document extraction.
pub type FieldValue = Field<String>;

impl<T> Field<T> {
    pub fn unknown() -> Self {
        Self {
            value: None,
            provenance: Vec::new(),
        }
    }

    pub fn known(value: T, provenance: Vec<Provenance>) -> Self {
        Self {
            value: Some(value),
            provenance,
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.value.is_none()
    }

    pub fn get(&self) -> Option<&T> {
        self.value.as_ref()
    }
}

impl<T> Default for Field<T> {
    fn default() -> Self {
        Self::unknown()
    }
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    value: serde_json::Value,
    #[serde(default)]
    provenance: Vec<Provenance>,
}

impl<T: Serialize> Serialize for Field<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let value = match &self.value {
            Some(v) => serde_json::to_value(v).map_err(serde::ser::Error::custom)?,
            None => serde_json::Value::String(UNKNOWN.to_string()),
        };
        FieldRepr {
            value,
            provenance: self.provenance.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Field<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = FieldRepr::deserialize(deserializer)?;
        let value = match repr.value {
            serde_json::Value::String(s) if s == UNKNOWN => None,
            serde_json::Value::Null => None,
            other => Some(serde_json::from_value(other).map_err(serde::de::Error::custom)?),
        };
        Ok(Self {
            value,
            provenance: repr.provenance,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HistologyGroup {
    #[serde(rename = "EOC")]
    Eoc,
    #[serde(rename = "BET")]
    Bet,
    #[serde(rename = "GCT")]
    Gct,
    #[serde(rename = "SCST")]
    Scst,
    #[serde(rename = "GCSCST")]
    Gcscst,
    #[serde(rename = "NEN")]
    Nen,
    Sarcoma,
    OtherAggressive,
}

impl HistologyGroup {
    pub const ALL: [HistologyGroup; 8] = [
        HistologyGroup::Eoc,
        HistologyGroup::Bet,
        HistologyGroup::Gct,
        HistologyGroup::Scst,
        HistologyGroup::Gcscst,
        HistologyGroup::Nen,
        HistologyGroup::Sarcoma,
        HistologyGroup::OtherAggressive,
    ];

    pub fn code(self) -> &'static str {
        match self {
            HistologyGroup::Eoc => "EOC",
            HistologyGroup::Bet => "BET",
            HistologyGroup::Gct => "GCT",
            HistologyGroup::Scst => "SCST",
            HistologyGroup::Gcscst => "GCSCST",
            HistologyGroup::Nen => "NEN",
            HistologyGroup::Sarcoma => "Sarcoma",
            HistologyGroup::OtherAggressive => "OtherAggressive",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HistologyGroup::Eoc => "epithelial ovarian cancer",
            HistologyGroup::Bet => "borderline epithelial tumour",
            HistologyGroup::Gct => "germ cell tumour",
            HistologyGroup::Scst => "sex cord-stromal tumour",
            HistologyGroup::Gcscst => "mixed germ cell sex cord-stromal tumour",
            HistologyGroup::Nen => "neuroendocrine neoplasm",
            HistologyGroup::Sarcoma => "ovarian sarcoma",
            HistologyGroup::OtherAggressive => "aggressive rare ovarian malignancy",
        }
    }

    pub fn parse(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|h| h.code().eq_ignore_ascii_case(code.trim()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FigoStage {
    I,
    II,
    III,
    IV,
}

impl FigoStage {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Some(FigoStage::I),
            "II" | "2" => Some(FigoStage::II),
            "III" | "3" => Some(FigoStage::III),
            "IV" | "4" => Some(FigoStage::IV),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            FigoStage::I => "I",
            FigoStage::II => "II",
            FigoStage::III => "III",
            FigoStage::IV => "IV",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrimaryStrategy {
    #[serde(rename = "PDS")]
    Pds,
    #[serde(rename = "NACT_IDS")]
    NactIds,
    #[serde(rename = "PST")]
    Pst,
}

impl PrimaryStrategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().replace(['+', '-', ' '], "_").as_str() {
            "PDS" => Some(PrimaryStrategy::Pds),
            "NACT_IDS" => Some(PrimaryStrategy::NactIds),
            "PST" => Some(PrimaryStrategy::Pst),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            PrimaryStrategy::Pds => "PDS",
            PrimaryStrategy::NactIds => "NACT_IDS",
            PrimaryStrategy::Pst => "PST",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentLine {
    pub therapy: String,
    pub start: NaiveDate,
    #[serde(default)]
    pub end: Option<NaiveDate>,
    pub line: u32,
    #[serde(default)]
    pub platinum: bool,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
}

impl TreatmentLine {
    /// Sort key; the merged history is strictly increasing in this key.
    pub fn order_key(&self) -> (NaiveDate, u32, String) {
        (self.start, self.line, self.therapy.to_lowercase())
    }
}

/// One of the five prespecified MDT decision contexts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "SceneRepr", into = "SceneRepr")]
pub struct ClinicalScene(u8);

impl ClinicalScene {
    pub const PRIMARY_MANAGEMENT: ClinicalScene = ClinicalScene(1);
    pub const HISTOLOGY_PATHWAY: ClinicalScene = ClinicalScene(2);
    pub const PLATINUM_RESISTANT: ClinicalScene = ClinicalScene(3);
    pub const PLATINUM_SENSITIVE: ClinicalScene = ClinicalScene(4);
    pub const EVENT_DRIVEN: ClinicalScene = ClinicalScene(5);

    pub const ALL: [ClinicalScene; 5] = [
        Self::PRIMARY_MANAGEMENT,
        Self::HISTOLOGY_PATHWAY,
        Self::PLATINUM_RESISTANT,
        Self::PLATINUM_SENSITIVE,
        Self::EVENT_DRIVEN,
    ];

    pub fn new(id: u8) -> Option<Self> {
        (1..=5).contains(&id).then_some(ClinicalScene(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            1 => "primary management",
            2 => "histology-driven pathways",
            3 => "platinum-resistant relapse",
            4 => "platinum-sensitive relapse",
            _ => "event-driven reassessment",
        }
    }
}

impl fmt::Display for ClinicalScene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scene {} ({})", self.0, self.label())
    }
}

#[derive(Serialize, Deserialize)]
struct SceneRepr {
    id: u8,
    label: String,
}

impl From<ClinicalScene> for SceneRepr {
    fn from(s: ClinicalScene) -> Self {
        SceneRepr {
            id: s.0,
            label: s.label().to_string(),
        }
    }
}

impl TryFrom<SceneRepr> for ClinicalScene {
    type Error = String;

    fn try_from(r: SceneRepr) -> Result<Self, Self::Error> {
        let scene = ClinicalScene::new(r.id).ok_or_else(|| format!("scene id {} outside 1..5", r.id))?;
        if scene.label() != r.label {
            return Err(format!("scene {} carries label {:?}, expected {:?}", r.id, r.label, scene.label()));
        }
        Ok(scene)
    }
}

/// Competing values for one field; the winning value is listed first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub field: String,
    pub candidates: Vec<FieldValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedDocument {
    pub doc_id: String,
    pub reason: String,
}

/// Biomarkers reported as `Unknown` when no document mentions them.
pub const STANDARD_BIOMARKERS: [&str; 3] = ["BRCA", "HRD", "CA-125"];

/// The merged, schema-normalized case. Key order of the serialized form is
/// the declaration order below; maps are sorted by key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredCase {
    pub case_id: String,
    pub index_mdt_date: NaiveDate,
    pub centre_id: String,
    pub age: Field<u32>,
    pub histology_group: Field<HistologyGroup>,
    pub figo_stage: Field<FigoStage>,
    pub primary_strategy: Field<PrimaryStrategy>,
    pub biomarkers: BTreeMap<String, Field<String>>,
    pub treatment_history: Vec<TreatmentLine>,
    pub platinum_free_interval_months: Field<f64>,
    pub event_flags: BTreeMap<String, Vec<Provenance>>,
    pub scene: ClinicalScene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_note: Option<String>,
    pub conflicts: Vec<Conflict>,
    /// Every document considered by the merge (after the decision-time cutoff).
    pub source_documents: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_documents: Vec<ExcludedDocument>,
}

impl StructuredCase {
    pub fn document(&self, doc_id: &str) -> Option<&Provenance> {
        self.source_documents.iter().find(|p| p.doc_id == doc_id)
    }

    pub fn is_treatment_naive(&self) -> bool {
        self.treatment_history.is_empty()
    }
}

/// Months between the end of the last platinum-containing line that finished
/// on or before `relapse_date` and the relapse itself. `None` unless both
/// dates exist.
pub fn platinum_free_interval(history: &[TreatmentLine], relapse_date: NaiveDate) -> Option<f64> {
    let last_platinum_end = history
        .iter()
        .filter(|t| t.platinum)
        .filter_map(|t| t.end)
        .filter(|end| *end <= relapse_date)
        .max()?;
    let days = (relapse_date - last_platinum_end).num_days() as f64;
    Some(days / DAYS_PER_MONTH)
}

const DAYS_PER_MONTH: f64 = 365.25 / 12.0;
