use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::OutputTemplate;
use super::message::{DecisionSummary, MessageBody, RequestKind};
use crate::case::StructuredCase;
use crate::evidence::{resolve_citation, CorpusSnapshot};
use crate::roles::Role;

/// Citation ids in `citations` that resolve neither to a snapshot entry nor
/// to a case document, deduplicated in order of first appearance.
pub fn unresolved_citations<'a>(
    citations: impl IntoIterator<Item = &'a str>,
    snapshot: &CorpusSnapshot,
    case: &StructuredCase,
) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in citations {
        if !resolve_citation(id, snapshot, case).is_resolved() && !out.iter().any(|o| o == id) {
            out.push(id.to_string());
        }
    }
    out
}

/// `Ok` iff every citation in `body` resolves; otherwise the unresolved ids.
pub fn enforce_citation_policy(
    body: &MessageBody,
    snapshot: &CorpusSnapshot,
    case: &StructuredCase,
) -> Result<(), Vec<String>> {
    let bad = unresolved_citations(body.citations(), snapshot, case);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryViolation {
    pub section: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<SummaryViolation>,
    pub unresolved_citations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, section: impl Into<String>, message: impl Into<String>) {
        self.violations.push(SummaryViolation {
            section: section.into(),
            message: message.into(),
        });
    }
}

/// Checks a decision summary against the output template: every section
/// nonempty and within its length limit, at least one change trigger, every
/// section and trigger citing at least one source, and every citation resolving.
pub fn validate_decision_summary(
    y: &DecisionSummary,
    snapshot: &CorpusSnapshot,
    case: &StructuredCase,
    template: &OutputTemplate,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let section = |name: String, text: &str, citations: &[String], limit: usize, report: &mut ValidationReport| {
        if text.trim().is_empty() {
            report.push(name.clone(), "empty text");
        }
        let len = text.chars().count();
        if len > limit {
            report.push(name.clone(), format!("{len} characters exceeds the limit of {limit}"));
        }
        if citations.is_empty() {
            report.push(name.clone(), "no citations");
        }
        for id in unresolved_citations(citations.iter().map(String::as_str), snapshot, case) {
            report.push(name.clone(), format!("unresolved citation {id}"));
            if !report.unresolved_citations.contains(&id) {
                report.unresolved_citations.push(id);
            }
        }
    };
    section(
        "final_assessment".into(),
        &y.final_assessment.text,
        &y.final_assessment.citations,
        template.final_assessment_max_chars,
        &mut report,
    );
    section(
        "core_treatment_strategy".into(),
        &y.core_treatment_strategy.text,
        &y.core_treatment_strategy.citations,
        template.core_strategy_max_chars,
        &mut report,
    );
    if y.change_triggers.is_empty() {
        report.push("change_triggers", "at least one change trigger is required");
    }
    if y.change_triggers.len() > template.max_change_triggers {
        report.push(
            "change_triggers",
            format!("{} triggers exceeds the limit of {}", y.change_triggers.len(), template.max_change_triggers),
        );
    }
    for (i, t) in y.change_triggers.iter().enumerate() {
        section(
            format!("change_triggers[{i}]"),
            &t.condition,
            &t.citations,
            template.change_trigger_max_chars,
            &mut report,
        );
    }
    report
}

/// Why an attempt was refused.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolicyViolation {
    pub violations: Vec<String>,
    pub unresolved: Vec<String>,
}

impl PolicyViolation {
    /// Notice appended to the instruction for the next attempt.
    pub fn notice(&self) -> String {
        let mut s = String::from("Your previous response was rejected.\n");
        for v in &self.violations {
            s.push_str("- ");
            s.push_str(v);
            s.push('\n');
        }
        if !self.unresolved.is_empty() {
            s.push_str(&format!(
                "Unresolved citation ids: {}. Cite only evidence entry_ids or patient document doc_ids present in the context.\n",
                self.unresolved.join(", ")
            ));
        }
        s
    }
}

/// Parses and checks one raw output for `request` from `role`.
pub fn check_message(
    raw: &Value,
    request: RequestKind,
    role: Role,
    snapshot: &CorpusSnapshot,
    case: &StructuredCase,
    template: &OutputTemplate,
) -> Result<MessageBody, PolicyViolation> {
    let body: MessageBody = serde_json::from_value(raw.clone()).map_err(|e| PolicyViolation {
        violations: vec![format!("schema: {e}")],
        unresolved: vec![],
    })?;
    let mut v = PolicyViolation::default();
    if !request.admits(body.kind()) {
        v.violations.push(format!(
            "message kind {:?} is not allowed for a {} request",
            body.kind(),
            request.id()
        ));
    }
    match &body {
        MessageBody::InitialAssessment { assessment, .. } if assessment.trim().is_empty() => {
            v.violations.push("assessment is empty".into());
        }
        MessageBody::Intervention {
            directed_to,
            rationale,
            content,
            ..
        } => {
            if rationale.trim().is_empty() {
                v.violations.push("intervention rationale is empty".into());
            }
            if content.trim().is_empty() {
                v.violations.push("intervention content is empty".into());
            }
            if *directed_to == role {
                v.violations.push("intervention is directed at its own author".into());
            }
        }
        MessageBody::ChairSummary(y) => {
            let report = validate_decision_summary(y, snapshot, case, template);
            for s in &report.violations {
                if !s.message.starts_with("unresolved citation") {
                    v.violations.push(format!("{}: {}", s.section, s.message));
                }
            }
        }
        _ => {}
    }
    v.unresolved = unresolved_citations(body.citations(), snapshot, case);
    if v.unresolved.is_empty() && v.violations.is_empty() {
        Ok(body)
    } else {
        Err(v)
    }
}
