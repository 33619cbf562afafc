use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::digest::canonical_hash;
use crate::roles::Role;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Full multi-agent protocol.
    Omgs,
    /// Single chair call over the structured case.
    ChairR,
    /// Structured case plus retrieved evidence.
    ChairE,
    /// Structured case, evidence and the full document dossier.
    ChairD,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Omgs, Mode::ChairR, Mode::ChairE, Mode::ChairD];

    pub fn id(self) -> &'static str {
        match self {
            Mode::Omgs => "omgs",
            Mode::ChairR => "chair-r",
            Mode::ChairE => "chair-e",
            Mode::ChairD => "chair-d",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Mode::ALL.into_iter().find(|m| m.id() == norm)
    }

    pub fn includes_evidence(self) -> bool {
        matches!(self, Mode::ChairE | Mode::ChairD)
    }

    pub fn includes_dossier(self) -> bool {
        self == Mode::ChairD
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Section length limits for the decision summary, in characters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTemplate {
    pub final_assessment_max_chars: usize,
    pub core_strategy_max_chars: usize,
    pub change_trigger_max_chars: usize,
    pub max_change_triggers: usize,
}

impl Default for OutputTemplate {
    fn default() -> Self {
        Self {
            final_assessment_max_chars: 1500,
            core_strategy_max_chars: 2000,
            change_trigger_max_chars: 400,
            max_change_triggers: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeliberationConfig {
    pub mode: Mode,
    pub max_rounds: u32,
    pub polling_order: Vec<Role>,
    /// Regenerations allowed after a policy or schema violation.
    pub citation_retry_budget: u32,
    /// Extra attempts after a retryable transport failure.
    pub backend_retry_budget: u32,
    /// Whether the chair also writes an initial assessment in round 0.
    pub chair_initial_assessment: bool,
    pub evidence_k: usize,
    pub seed: u64,
    pub output_template: OutputTemplate,
}

impl Default for DeliberationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Omgs,
            max_rounds: 3,
            polling_order: Role::SPECIALISTS.to_vec(),
            citation_retry_budget: 2,
            backend_retry_budget: 2,
            chair_initial_assessment: true,
            evidence_k: 10,
            seed: 0,
            output_template: OutputTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("polling order {0:?} is not a permutation of the four specialist roles")]
    PollingOrder(Vec<Role>),
    #[error("evidence_k must be at least 1")]
    ZeroK,
    #[error("output template: {0}")]
    Template(&'static str),
    #[error("config: {0}")]
    Parse(String),
}

impl DeliberationConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_rounds == 0 {
            return Err(ConfigError::ZeroRounds);
        }
        let order: BTreeSet<Role> = self.polling_order.iter().copied().collect();
        if self.polling_order.len() != 4 || order != Role::SPECIALISTS.into_iter().collect() {
            return Err(ConfigError::PollingOrder(self.polling_order.clone()));
        }
        if self.evidence_k == 0 {
            return Err(ConfigError::ZeroK);
        }
        let t = &self.output_template;
        if t.max_change_triggers == 0 {
            return Err(ConfigError::Template("max_change_triggers must be at least 1"));
        }
        if t.final_assessment_max_chars == 0 || t.core_strategy_max_chars == 0 || t.change_trigger_max_chars == 0 {
            return Err(ConfigError::Template("section limits must be positive"));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        format!("sha256:{}", canonical_hash(self))
    }

    /// Top-level keys whose values differ between `self` and `other`.
    pub fn diff(&self, other: &DeliberationConfig) -> Vec<String> {
        let a = serde_json::to_value(self).expect("config serializes");
        let b = serde_json::to_value(other).expect("config serializes");
        let (a, b) = (a.as_object().unwrap(), b.as_object().unwrap());
        a.keys()
            .chain(b.keys())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|k| a.get(*k) != b.get(*k))
            .cloned()
            .collect()
    }
}
