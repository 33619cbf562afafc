use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::roles::Role;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Trigger {
    Conflict,
    SafetyConcern,
    MissingInfo,
    NewEvidence,
}

/// A text section with its supporting citation ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitedText {
    pub text: String,
    pub citations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeTrigger {
    pub condition: String,
    pub citations: Vec<String>,
}

/// The final recommendation: assessment, core strategy and change triggers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionSummary {
    pub final_assessment: CitedText,
    pub core_treatment_strategy: CitedText,
    #[serde(default)]
    pub change_triggers: Vec<ChangeTrigger>,
}

impl DecisionSummary {
    /// `(section, citation id)` pairs in document order.
    pub fn citations(&self) -> Vec<(String, &str)> {
        let mut out: Vec<(String, &str)> = Vec::new();
        for c in &self.final_assessment.citations {
            out.push(("final_assessment".into(), c));
        }
        for c in &self.core_treatment_strategy.citations {
            out.push(("core_treatment_strategy".into(), c));
        }
        for (i, t) in self.change_triggers.iter().enumerate() {
            for c in &t.citations {
                out.push((format!("change_triggers[{i}]"), c));
            }
        }
        out
    }
}

/// Structured message content, tagged by `kind` on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MessageBody {
    InitialAssessment {
        assessment: String,
        #[serde(default)]
        safety_considerations: Vec<String>,
        #[serde(default)]
        uncertainties: Vec<String>,
        #[serde(default)]
        citations: Vec<String>,
    },
    Intervention {
        trigger: Trigger,
        directed_to: Role,
        rationale: String,
        content: String,
        #[serde(default)]
        citations: Vec<String>,
    },
    Silence {},
    ChairSummary(DecisionSummary),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    InitialAssessment,
    Intervention,
    Silence,
    ChairSummary,
}

impl MessageBody {
    pub fn kind(&self) -> MessageKind {
        match self {
            MessageBody::InitialAssessment { .. } => MessageKind::InitialAssessment,
            MessageBody::Intervention { .. } => MessageKind::Intervention,
            MessageBody::Silence {} => MessageKind::Silence,
            MessageBody::ChairSummary(_) => MessageKind::ChairSummary,
        }
    }

    pub fn citations(&self) -> Vec<&str> {
        match self {
            MessageBody::InitialAssessment { citations, .. } | MessageBody::Intervention { citations, .. } => {
                citations.iter().map(String::as_str).collect()
            }
            MessageBody::Silence {} => Vec::new(),
            MessageBody::ChairSummary(y) => y.citations().into_iter().map(|(_, c)| c).collect(),
        }
    }
}

/// What a generation call asked for; fixes the admissible message kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    InitialAssessment,
    Deliberation,
    ChairSummary,
}

impl RequestKind {
    pub fn id(self) -> &'static str {
        match self {
            RequestKind::InitialAssessment => "initial_assessment",
            RequestKind::Deliberation => "deliberation",
            RequestKind::ChairSummary => "chair_summary",
        }
    }

    pub fn schema_id(self) -> &'static str {
        match self {
            RequestKind::InitialAssessment => "initial_assessment.v1",
            RequestKind::Deliberation => "deliberation_turn.v1",
            RequestKind::ChairSummary => "chair_summary.v1",
        }
    }

    pub fn admits(self, kind: MessageKind) -> bool {
        match self {
            RequestKind::InitialAssessment => kind == MessageKind::InitialAssessment,
            RequestKind::Deliberation => matches!(kind, MessageKind::Intervention | MessageKind::Silence),
            RequestKind::ChairSummary => kind == MessageKind::ChairSummary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageStatus {
    Accepted,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub violations: Vec<String>,
    pub unresolved_citations: Vec<String>,
    /// Output of the final attempt, verbatim.
    pub last_output: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub seq: u32,
    pub round: u32,
    pub role: Role,
    pub request: RequestKind,
    pub status: MessageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<MessageBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
    pub attempts: u32,
}

impl AgentMessage {
    pub fn is_accepted(&self) -> bool {
        self.status == MessageStatus::Accepted
    }

    pub fn kind(&self) -> Option<MessageKind> {
        self.body.as_ref().map(MessageBody::kind)
    }
}
