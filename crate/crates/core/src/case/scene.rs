//! A-priori scene assignment.
//!
//! Rules are evaluated in the fixed order 5 → 2 → 3 → 4 → 1 and the first
//! match wins. A case matching none of them falls back to scene 5 with an
//! audit note, so assignment is total.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ClinicalScene, HistologyGroup, StructuredCase};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRuleTable {
    /// Relapses with a platinum-free interval below this are platinum-resistant.
    pub pfi_threshold_months: f64,
    /// Histologies routed to the histology-driven pathway regardless of line.
    pub pathway_histologies: BTreeSet<HistologyGroup>,
}

impl Default for SceneRuleTable {
    fn default() -> Self {
        Self {
            pfi_threshold_months: 6.0,
            pathway_histologies: HistologyGroup::ALL
                .into_iter()
                .filter(|h| *h != HistologyGroup::Eoc)
                .collect(),
        }
    }
}

pub fn assign_scene(case: &StructuredCase, rules: &SceneRuleTable) -> (ClinicalScene, Option<String>) {
    if !case.event_flags.is_empty() {
        let flags: Vec<&str> = case.event_flags.keys().map(String::as_str).collect();
        return (ClinicalScene::EVENT_DRIVEN, Some(format!("event flags: {}", flags.join(", "))));
    }
    if case
        .histology_group
        .get()
        .is_some_and(|h| rules.pathway_histologies.contains(h))
    {
        return (ClinicalScene::HISTOLOGY_PATHWAY, None);
    }
    if let Some(pfi) = case.platinum_free_interval_months.get() {
        return if *pfi < rules.pfi_threshold_months {
            (ClinicalScene::PLATINUM_RESISTANT, None)
        } else {
            (ClinicalScene::PLATINUM_SENSITIVE, None)
        };
    }
    if case.is_treatment_naive() {
        return (ClinicalScene::PRIMARY_MANAGEMENT, None);
    }
    (
        ClinicalScene::EVENT_DRIVEN,
        Some("unresolvable: prior treatment without a platinum-free interval".into()),
    )
}
