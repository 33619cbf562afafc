use serde::{Deserialize, Serialize};

use crate::case::StructuredCase;

/// Disease term used when nothing case-specific is known.
pub const GENERIC_DISEASE_TERM: &str = "ovarian tumour";

/// Role-specific retrieval terms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryTemplate {
    pub id: String,
    pub terms: Vec<String>,
}

impl QueryTemplate {
    pub fn new(id: &str, terms: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            terms: terms.iter().map(|t| t.to_string()).collect(),
        }
    }

    pub fn builtin(id: &str) -> Option<Self> {
        let terms: &[&str] = match id {
            "oncology" => &["systemic therapy", "maintenance therapy", "treatment line"],
            "radiology" => &["imaging response assessment", "CT MRI staging"],
            "pathology" => &["histopathology", "molecular testing", "BRCA HRD"],
            "nuclear" => &["PET-CT", "recurrence detection"],
            "chair" => &["guideline recommendation", "multidisciplinary management"],
            _ => return None,
        };
        Some(Self::new(id, terms))
    }

    pub fn builtin_ids() -> [&'static str; 5] {
        ["oncology", "radiology", "pathology", "nuclear", "chair"]
    }
}

/// Structured retrieval query built from the known parts of a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceQuery {
    pub disease_context: Vec<String>,
    pub scene: String,
    pub prior_treatments: Vec<String>,
    pub free_terms: Vec<String>,
}

impl EvidenceQuery {
    /// Text handed to the embedder.
    pub fn render(&self) -> String {
        let mut parts = vec![format!("disease: {}", self.disease_context.join(", "))];
        parts.push(format!("scene: {}", self.scene));
        if !self.prior_treatments.is_empty() {
            parts.push(format!("prior treatment: {}", self.prior_treatments.join(", ")));
        }
        if !self.free_terms.is_empty() {
            parts.push(format!("terms: {}", self.free_terms.join(", ")));
        }
        parts.join("; ")
    }
}

/// Query from case fields only. Unknown fields contribute nothing.
pub fn build_query(case: &StructuredCase) -> EvidenceQuery {
    let mut disease_context = vec![GENERIC_DISEASE_TERM.to_string()];
    if let Some(h) = case.histology_group.get() {
        disease_context.push(h.label().to_string());
        disease_context.push(h.code().to_string());
    }
    if let Some(stage) = case.figo_stage.get() {
        disease_context.push(format!("FIGO stage {}", stage.code()));
    }
    let mut prior_treatments: Vec<String> = Vec::new();
    for t in &case.treatment_history {
        if !prior_treatments.contains(&t.therapy) {
            prior_treatments.push(t.therapy.clone());
        }
    }
    let mut free_terms = Vec::new();
    for (name, field) in &case.biomarkers {
        if let Some(v) = field.get() {
            free_terms.push(format!("{name} {v}"));
        }
    }
    if let Some(strategy) = case.primary_strategy.get() {
        free_terms.push(strategy.code().to_string());
    }
    EvidenceQuery {
        disease_context,
        scene: case.scene.label().to_string(),
        prior_treatments,
        free_terms,
    }
}

/// [`build_query`] followed by the template's terms.
pub fn build_query_with(case: &StructuredCase, template: &QueryTemplate) -> EvidenceQuery {
    let mut q = build_query(case);
    q.free_terms.extend(template.terms.iter().cloned());
    q
}
