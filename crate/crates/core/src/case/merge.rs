//! Cross-document merge with modality- and time-based precedence.
//!
//! For each field, candidates are ranked by
//! 1. the field's authoritative modality list (earlier is stronger; modalities
//!    not listed rank after all listed ones),
//! 2. latest `doc_date`,
//! 3. lexicographically smallest `doc_id`.
//!
//! The best candidate's value wins. Every document asserting the winning value
//! contributes provenance; distinct losing values are kept in `conflicts`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use super::extract::{BIOMARKER_PREFIX, FIELD_AGE, FIELD_HISTOLOGY, FIELD_PFI, FIELD_STAGE, FIELD_STRATEGY};
use super::scene::{assign_scene, SceneRuleTable};
use super::{
    Conflict, DocType, ExcludedDocument, Field, FieldValue, FigoStage, HistologyGroup, PartialExtraction,
    PrimaryStrategy, Provenance, RawCaseRecord, StructuredCase, TreatmentLine, STANDARD_BIOMARKERS,
};

/// Serum tumour markers take their authority from the laboratory.
const LAB_MARKERS: [&str; 6] = ["CA-125", "HE4", "CEA", "AFP", "INHIBIN", "LDH"];

/// Authoritative modalities for a field, strongest first.
pub fn authoritative_modalities(field: &str) -> &'static [DocType] {
    if field == FIELD_HISTOLOGY {
        &[DocType::Pathology]
    } else if field == FIELD_STAGE {
        &[DocType::Operative, DocType::Imaging]
    } else if let Some(marker) = field.strip_prefix(BIOMARKER_PREFIX) {
        if LAB_MARKERS.iter().any(|m| m.eq_ignore_ascii_case(marker)) {
            &[DocType::Laboratory]
        } else {
            &[DocType::Genomic, DocType::Pathology]
        }
    } else {
        &[]
    }
}

fn precedence_key<'a>(field: &str, p: &'a Provenance) -> (usize, Reverse<chrono::NaiveDate>, &'a str) {
    let modalities = authoritative_modalities(field);
    let rank = modalities.iter().position(|m| *m == p.doc_type).unwrap_or(modalities.len());
    (rank, Reverse(p.doc_date), p.doc_id.as_str())
}

/// Resolves one field. Returns the winner (with the provenance of every
/// document agreeing with it) and, when values disagree, the conflict record.
fn resolve_field(field: &str, candidates: &[(String, Provenance)]) -> (FieldValue, Option<Conflict>) {
    if candidates.is_empty() {
        return (FieldValue::unknown(), None);
    }
    let mut ranked: Vec<&(String, Provenance)> = candidates.iter().collect();
    ranked.sort_by(|a, b| precedence_key(field, &a.1).cmp(&precedence_key(field, &b.1)));

    // Group by value, keeping groups in order of their strongest candidate.
    let mut groups: Vec<FieldValue> = Vec::new();
    for (value, prov) in ranked {
        match groups.iter_mut().find(|g| g.value.as_deref() == Some(value.as_str())) {
            Some(g) => g.provenance.push(prov.clone()),
            None => groups.push(FieldValue::known(value.clone(), vec![prov.clone()])),
        }
    }
    let winner = groups[0].clone();
    let conflict = (groups.len() > 1).then(|| Conflict {
        field: field.to_string(),
        candidates: groups,
    });
    (winner, conflict)
}

fn typed<T>(field: FieldValue, parse: impl Fn(&str) -> Option<T>) -> Field<T> {
    match field.value.as_deref().and_then(parse) {
        Some(v) => Field::known(v, field.provenance),
        None => Field::unknown(),
    }
}

pub fn merge_extractions(record: &RawCaseRecord, partials: &[PartialExtraction]) -> StructuredCase {
    merge_extractions_with(record, partials, &SceneRuleTable::default())
}

/// Folds per-document extractions into a [`StructuredCase`].
///
/// Partials whose document is unknown to `record` or dated after the index
/// MDT date are ignored; the latter are listed in `excluded_documents`.
pub fn merge_extractions_with(
    record: &RawCaseRecord,
    partials: &[PartialExtraction],
    rules: &SceneRuleTable,
) -> StructuredCase {
    let mut excluded = Vec::new();
    let mut source_documents = Vec::new();
    for doc in &record.documents {
        if doc.doc_date > record.index_mdt_date {
            excluded.push(ExcludedDocument {
                doc_id: doc.doc_id.clone(),
                reason: format!("dated {} after index MDT date {}", doc.doc_date, record.index_mdt_date),
            });
        } else {
            source_documents.push(doc.provenance());
        }
    }
    source_documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let admitted: BTreeSet<&str> = source_documents.iter().map(|p| p.doc_id.as_str()).collect();

    // Deterministic fold order regardless of input order.
    let mut usable: Vec<&PartialExtraction> =
        partials.iter().filter(|p| admitted.contains(p.doc.doc_id.as_str())).collect();
    usable.sort_by(|a, b| a.doc.doc_id.cmp(&b.doc.doc_id));

    let mut candidates: BTreeMap<String, Vec<(String, Provenance)>> = BTreeMap::new();
    let mut mentioned: BTreeSet<String> = BTreeSet::new();
    let mut flags: BTreeMap<String, Vec<Provenance>> = BTreeMap::new();
    let mut treatments: Vec<TreatmentLine> = Vec::new();
    for partial in &usable {
        for (name, fv) in &partial.fields {
            mentioned.insert(name.clone());
            if let Some(v) = &fv.value {
                candidates.entry(name.clone()).or_default().push((v.clone(), partial.doc.clone()));
            }
        }
        for flag in &partial.event_flags {
            flags.entry(flag.clone()).or_default().push(partial.doc.clone());
        }
        treatments.extend(partial.treatments.iter().cloned().map(|mut t| {
            t.provenance = vec![partial.doc.clone()];
            t
        }));
    }

    let mut conflicts = Vec::new();
    let mut take = |name: &str| -> FieldValue {
        let (winner, conflict) = resolve_field(name, candidates.get(name).map(Vec::as_slice).unwrap_or(&[]));
        conflicts.extend(conflict);
        winner
    };

    let age = typed(take(FIELD_AGE), |s| s.parse::<u32>().ok());
    let histology_group = typed(take(FIELD_HISTOLOGY), HistologyGroup::parse);
    let figo_stage = typed(take(FIELD_STAGE), FigoStage::parse);
    let primary_strategy = typed(take(FIELD_STRATEGY), PrimaryStrategy::parse);
    let platinum_free_interval_months = typed(take(FIELD_PFI), |s| s.parse::<f64>().ok());

    let mut marker_names: BTreeSet<String> = STANDARD_BIOMARKERS.iter().map(|s| s.to_string()).collect();
    marker_names.extend(mentioned.iter().filter_map(|f| f.strip_prefix(BIOMARKER_PREFIX)).map(str::to_string));
    let biomarkers = marker_names
        .into_iter()
        .map(|m| {
            let v = take(&format!("{BIOMARKER_PREFIX}{m}"));
            (m, v)
        })
        .collect();

    for provs in flags.values_mut() {
        provs.sort();
        provs.dedup();
    }

    let treatment_history = merge_treatments(treatments, &mut conflicts);

    let mut case = StructuredCase {
        case_id: record.case_id.clone(),
        index_mdt_date: record.index_mdt_date,
        centre_id: record.centre_id.clone(),
        age,
        histology_group,
        figo_stage,
        primary_strategy,
        biomarkers,
        treatment_history,
        platinum_free_interval_months,
        event_flags: flags,
        scene: super::ClinicalScene::EVENT_DRIVEN,
        scene_note: None,
        conflicts,
        source_documents,
        excluded_documents: excluded,
    };
    let (scene, note) = assign_scene(&case, rules);
    case.scene = scene;
    case.scene_note = note;
    case
}

/// Collapses repeated mentions of the same line (same therapy, start and line
/// number) and orders the history. Disagreeing end dates resolve to the
/// latest reporting document and are recorded as a conflict.
fn merge_treatments(mut all: Vec<TreatmentLine>, conflicts: &mut Vec<Conflict>) -> Vec<TreatmentLine> {
    all.sort_by(|a, b| {
        a.order_key()
            .cmp(&b.order_key())
            .then_with(|| precedence_key("", &a.provenance[0]).cmp(&precedence_key("", &b.provenance[0])))
    });
    let mut merged: Vec<TreatmentLine> = Vec::new();
    let mut end_candidates: Vec<Vec<(String, Provenance)>> = Vec::new();
    for t in all {
        let end_text = t.end.map(|e| e.to_string());
        match merged.last_mut() {
            Some(last) if last.order_key() == t.order_key() => {
                last.provenance.extend(t.provenance.iter().cloned());
                last.platinum |= t.platinum;
                if let Some(e) = end_text {
                    end_candidates.last_mut().expect("parallel vec").push((e, t.provenance[0].clone()));
                }
            }
            _ => {
                end_candidates.push(end_text.into_iter().map(|e| (e, t.provenance[0].clone())).collect());
                merged.push(t);
            }
        }
    }
    for (line, ends) in merged.iter_mut().zip(end_candidates) {
        line.provenance.sort();
        line.provenance.dedup();
        let name = format!("treatment:{}@{}:end", line.therapy, line.start);
        let (winner, conflict) = resolve_field(&name, &ends);
        line.end = winner.value.and_then(|e| e.parse().ok());
        conflicts.extend(conflict);
    }
    merged
}
