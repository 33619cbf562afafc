use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{DeliberationConfig, Mode};
use super::message::{AgentMessage, DecisionSummary, MessageBody, MessageKind, RequestKind};
use crate::digest::{canonical_json, FieldHasher};
use crate::roles::Role;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub case_id: String,
    pub mode: Mode,
    pub config_hash: String,
    pub config: DeliberationConfig,
    pub snapshot_id: String,
    pub backend_id: String,
    pub matrix_hash: String,
}

/// Ordered record of every generated message, accepted or rejected.
///
/// Persisted as JSON lines: a header line followed by one line per message.
/// Each line carries the hash of its predecessor, so editing any message
/// without rewriting every later line is detected on load.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    messages: Vec<AgentMessage>,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("transcript is empty")]
    Empty,
    #[error("transcript line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("transcript line {line}: hash chain broken")]
    Tampered { line: usize },
    #[error("transcript header config_hash does not match its config")]
    HeaderConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: TranscriptHeader,
    hash: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageLine {
    prev_hash: String,
    message: AgentMessage,
    hash: String,
}

fn genesis_hash(header: &TranscriptHeader) -> String {
    let mut h = FieldHasher::new();
    h.str("omgs-transcript/v1").field(&canonical_json(header));
    h.finish_hex()
}

fn link_hash(prev: &str, message: &AgentMessage) -> String {
    let mut h = FieldHasher::new();
    h.str(prev).field(&canonical_json(message));
    h.finish_hex()
}

impl Transcript {
    pub fn new(header: TranscriptHeader) -> Self {
        Self {
            header,
            messages: Vec::new(),
        }
    }

    /// Appends `message`, assigning the next sequence number.
    pub fn push(&mut self, mut message: AgentMessage) -> &AgentMessage {
        message.seq = self.messages.len() as u32;
        self.messages.push(message);
        self.messages.last().unwrap()
    }

    pub fn messages(&self) -> &[AgentMessage] {
        &self.messages
    }

    pub fn accepted(&self) -> impl Iterator<Item = &AgentMessage> {
        self.messages.iter().filter(|m| m.is_accepted())
    }

    /// Accepted messages as handed to agents: `{seq, round, role, message}`.
    pub fn view(&self) -> Value {
        Value::Array(
            self.accepted()
                .map(|m| json!({"seq": m.seq, "round": m.round, "role": m.role, "message": m.body}))
                .collect(),
        )
    }

    pub fn max_round(&self) -> u32 {
        self.messages.iter().map(|m| m.round).max().unwrap_or(0)
    }

    pub fn final_summary(&self) -> Option<&DecisionSummary> {
        match self.messages.last() {
            Some(AgentMessage {
                body: Some(MessageBody::ChairSummary(y)),
                ..
            }) => Some(y),
            _ => None,
        }
    }

    /// Hash of the last line; identifies the whole transcript.
    pub fn head_hash(&self) -> String {
        self.messages
            .iter()
            .fold(genesis_hash(&self.header), |prev, m| link_hash(&prev, m))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut prev = genesis_hash(&self.header);
        let header = HeaderLine {
            header: self.header.clone(),
            hash: prev.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for m in &self.messages {
            let hash = link_hash(&prev, m);
            let line = MessageLine {
                prev_hash: prev,
                message: m.clone(),
                hash: hash.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("message serializes"));
            out.push('\n');
            prev = hash;
        }
        out
    }

    /// Parses and verifies the hash chain.
    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TranscriptError::Empty)?;
        let header: HeaderLine = serde_json::from_str(first).map_err(|e| TranscriptError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if header.header.config_hash != header.header.config.config_hash() {
            return Err(TranscriptError::HeaderConfig);
        }
        let mut prev = genesis_hash(&header.header);
        if prev != header.hash {
            return Err(TranscriptError::Tampered { line: 1 });
        }
        let mut messages = Vec::new();
        for (i, line) in lines {
            let parsed: MessageLine = serde_json::from_str(line).map_err(|e| TranscriptError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let expected = link_hash(&prev, &parsed.message);
            if parsed.prev_hash != prev || parsed.hash != expected || parsed.message.seq as usize != messages.len() {
                return Err(TranscriptError::Tampered { line: i + 1 });
            }
            prev = expected;
            messages.push(parsed.message);
        }
        Ok(Self {
            header: header.header,
            messages,
        })
    }

    /// Structural invariants of a completed transcript.
    pub fn check_shape(&self) -> Vec<String> {
        let config = &self.header.config;
        let mut out = Vec::new();
        let msgs = &self.messages;
        if msgs.windows(2).any(|w| w[1].round < w[0].round) {
            out.push("round indices decrease".to_string());
        }
        if self.max_round() > config.max_rounds {
            out.push(format!("round {} exceeds max_rounds {}", self.max_round(), config.max_rounds));
        }
        let summaries = msgs.iter().filter(|m| m.request == RequestKind::ChairSummary).count();
        let last_is_summary = msgs
            .last()
            .is_some_and(|m| m.is_accepted() && m.kind() == Some(MessageKind::ChairSummary) && m.role == Role::Chair);
        if summaries != 1 || !last_is_summary {
            out.push("transcript must end with exactly one accepted chair summary".to_string());
        }
        for m in msgs {
            if let Some(kind) = m.kind() {
                if !m.request.admits(kind) {
                    out.push(format!("message {} has kind {kind:?} for a {} request", m.seq, m.request.id()));
                }
            }
            if m.is_accepted() != m.body.is_some() || m.is_accepted() == m.rejection.is_some() {
                out.push(format!("message {} status does not match its content", m.seq));
            }
            if let Some(MessageBody::Intervention { rationale, .. }) = &m.body {
                if rationale.trim().is_empty() {
                    out.push(format!("message {} intervention without rationale", m.seq));
                }
            }
        }
        match self.header.mode {
            Mode::Omgs => {
                let expected = if config.chair_initial_assessment { 5 } else { 4 };
                let initial: Vec<_> = msgs.iter().filter(|m| m.request == RequestKind::InitialAssessment).collect();
                if initial.len() != expected || initial.iter().any(|m| m.round != 0) {
                    out.push(format!("expected {expected} initial assessments in round 0"));
                }
            }
            _ => {
                if msgs.len() != 1 {
                    out.push("single-agent modes produce exactly one message".to_string());
                }
            }
        }
        out
    }
}
