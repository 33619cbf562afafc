//! Three-phase deliberation protocol and single-agent baselines.
//!
//! Round 0 collects independent assessments, rounds 1.. poll specialists for
//! trigger-gated interventions, and the chair closes with a
//! [`DecisionSummary`]. Every message passes schema and citation checks
//! before it can enter another agent's context.

mod config;
mod ledger;
mod message;
mod policy;
mod protocol;
mod transcript;

pub use config::{ConfigError, DeliberationConfig, Mode, OutputTemplate};
pub use ledger::{UsageLedger, UsageRecord, UsageTotals};
pub use message::{
    AgentMessage, ChangeTrigger, CitedText, DecisionSummary, MessageBody, MessageKind, MessageStatus, Rejection,
    RequestKind, Trigger,
};
pub use policy::{
    check_message, enforce_citation_policy, unresolved_citations, validate_decision_summary, PolicyViolation,
    SummaryViolation, ValidationReport,
};
pub use protocol::{
    baseline_context, chair_evidence, documents_context, evidence_context, package_context, replay_transcript,
    run_case, Backends, CaseFailure, CaseInputs, Deliberation, ProtocolError, ReplayError, RunOutcome,
    INSTRUCTION_CHAIR, INSTRUCTION_DELIBERATION, INSTRUCTION_INITIAL,
};
pub use transcript::{Transcript, TranscriptError, TranscriptHeader};
