use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{AccessMatrix, CaseField, Role};
use crate::case::{
    ClinicalScene, Conflict, Field, FigoStage, HistologyGroup, PrimaryStrategy, Provenance, SourceDocument,
    StructuredCase, TreatmentLine,
};
use crate::evidence::{build_query_with, search, CorpusSnapshot, Embedder, SearchError, SearchHit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: Field<u32>,
    pub centre_id: String,
}

/// The subset of a [`StructuredCase`] a role may see. Absent groups are omitted
/// from the serialized form entirely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseProjection {
    pub case_id: String,
    pub index_mdt_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histology_group: Option<Field<HistologyGroup>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figo_stage: Option<Field<FigoStage>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_strategy: Option<Field<PrimaryStrategy>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biomarkers: Option<BTreeMap<String, Field<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment_history: Option<Vec<TreatmentLine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platinum_free_interval_months: Option<Field<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_flags: Option<BTreeMap<String, Vec<Provenance>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<ClinicalScene>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflicts: Option<Vec<Conflict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_documents: Option<Vec<Provenance>>,
}

impl CaseProjection {
    pub fn project(case: &StructuredCase, fields: &std::collections::BTreeSet<CaseField>) -> Self {
        let has = |f: CaseField| fields.contains(&f);
        CaseProjection {
            case_id: case.case_id.clone(),
            index_mdt_date: case.index_mdt_date,
            demographics: has(CaseField::Demographics).then(|| Demographics {
                age: case.age.clone(),
                centre_id: case.centre_id.clone(),
            }),
            histology_group: has(CaseField::Histology).then(|| case.histology_group.clone()),
            figo_stage: has(CaseField::FigoStage).then(|| case.figo_stage.clone()),
            primary_strategy: has(CaseField::PrimaryStrategy).then(|| case.primary_strategy.clone()),
            biomarkers: has(CaseField::Biomarkers).then(|| case.biomarkers.clone()),
            treatment_history: has(CaseField::TreatmentHistory).then(|| case.treatment_history.clone()),
            platinum_free_interval_months: has(CaseField::PlatinumFreeInterval)
                .then(|| case.platinum_free_interval_months.clone()),
            event_flags: has(CaseField::EventFlags).then(|| case.event_flags.clone()),
            scene: has(CaseField::Scene).then_some(case.scene),
            scene_note: if has(CaseField::Scene) { case.scene_note.clone() } else { None },
            conflicts: has(CaseField::Conflicts).then(|| case.conflicts.clone()),
            source_documents: has(CaseField::SourceDocuments).then(|| case.source_documents.clone()),
        }
    }
}

/// Everything one agent receives before deliberation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolePackage {
    pub role: Role,
    pub case_id: String,
    pub projection: CaseProjection,
    pub documents: Vec<SourceDocument>,
    pub evidence: Vec<SearchHit>,
    pub snapshot_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PackageError {
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Builds `role`'s package. Only documents that survived the merge cutoff
/// (listed in `case.source_documents`) and pass the role's document rules are
/// included, in the order given.
pub fn build_role_package(
    case: &StructuredCase,
    documents: &[SourceDocument],
    role: Role,
    matrix: &AccessMatrix,
    snapshot: &CorpusSnapshot,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<RolePackage, PackageError> {
    let access = matrix.access(role);
    let documents = documents
        .iter()
        .filter(|d| case.document(&d.doc_id).is_some() && access.admits(d))
        .cloned()
        .collect();
    let query = build_query_with(case, &matrix.query_template(role));
    let evidence = search(snapshot, &query, embedder, k)?;
    Ok(RolePackage {
        role,
        case_id: case.case_id.clone(),
        projection: CaseProjection::project(case, &access.fields),
        documents,
        evidence,
        snapshot_id: snapshot.snapshot_id().to_string(),
    })
}

/// Packages for all five roles, built concurrently.
pub fn build_role_packages(
    case: &StructuredCase,
    documents: &[SourceDocument],
    matrix: &AccessMatrix,
    snapshot: &CorpusSnapshot,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<BTreeMap<Role, RolePackage>, PackageError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = Role::ALL
            .into_iter()
            .map(|role| s.spawn(move || build_role_package(case, documents, role, matrix, snapshot, embedder, k)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                let p = h.join().expect("package builder panicked")?;
                Ok((p.role, p))
            })
            .collect()
    })
}
