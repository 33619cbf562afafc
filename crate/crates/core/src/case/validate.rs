use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Field, Provenance, StructuredCase};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseViolation {
    pub field: String,
    pub message: String,
}

impl CaseViolation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Lists every broken [`StructuredCase`] invariant; empty iff the case is valid.
pub fn validate_case(case: &StructuredCase) -> Vec<CaseViolation> {
    let mut out = Vec::new();
    let docs: BTreeSet<&str> = case.source_documents.iter().map(|p| p.doc_id.as_str()).collect();

    let check_provenance = |out: &mut Vec<CaseViolation>, name: &str, known: bool, provenance: &[Provenance]| {
        if known && provenance.is_empty() {
            out.push(CaseViolation::new(name, "known value without provenance"));
        }
        if !known && !provenance.is_empty() {
            out.push(CaseViolation::new(name, "Unknown value carries provenance"));
        }
        for p in provenance {
            if !docs.contains(p.doc_id.as_str()) {
                out.push(CaseViolation::new(name, format!("provenance {} does not resolve", p.doc_id)));
            }
        }
    };
    fn known<T>(f: &Field<T>) -> bool {
        f.value.is_some()
    }

    check_provenance(&mut out, "age", known(&case.age), &case.age.provenance);
    check_provenance(&mut out, "histology_group", known(&case.histology_group), &case.histology_group.provenance);
    check_provenance(&mut out, "figo_stage", known(&case.figo_stage), &case.figo_stage.provenance);
    check_provenance(&mut out, "primary_strategy", known(&case.primary_strategy), &case.primary_strategy.provenance);
    check_provenance(
        &mut out,
        "platinum_free_interval_months",
        known(&case.platinum_free_interval_months),
        &case.platinum_free_interval_months.provenance,
    );
    for (name, field) in &case.biomarkers {
        check_provenance(&mut out, &format!("biomarkers.{name}"), known(field), &field.provenance);
        if field.value.as_deref() == Some(super::UNKNOWN) {
            out.push(CaseViolation::new(format!("biomarkers.{name}"), "sentinel stored as a known value"));
        }
    }
    for (flag, provenance) in &case.event_flags {
        check_provenance(&mut out, &format!("event_flags.{flag}"), true, provenance);
    }

    if let Some(pfi) = case.platinum_free_interval_months.get() {
        if !pfi.is_finite() || *pfi < 0.0 {
            out.push(CaseViolation::new("platinum_free_interval_months", "must be a nonnegative number"));
        }
    }
    if case.age.get().is_some_and(|a| *a > 130) {
        out.push(CaseViolation::new("age", "implausible age"));
    }

    for (i, line) in case.treatment_history.iter().enumerate() {
        let name = format!("treatment_history[{i}]");
        check_provenance(&mut out, &name, true, &line.provenance);
        if line.end.is_some_and(|end| end < line.start) {
            out.push(CaseViolation::new(&name, "ends before it starts"));
        }
    }
    for (i, pair) in case.treatment_history.windows(2).enumerate() {
        if pair[0].order_key() >= pair[1].order_key() {
            out.push(CaseViolation::new(
                format!("treatment_history[{}]", i + 1),
                "not strictly after the preceding line",
            ));
        }
    }

    for conflict in &case.conflicts {
        for candidate in &conflict.candidates {
            check_provenance(&mut out, &format!("conflicts.{}", conflict.field), known(candidate), &candidate.provenance);
        }
    }
    out
}
