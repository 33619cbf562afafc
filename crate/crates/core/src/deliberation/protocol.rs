use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

use super::config::{ConfigError, DeliberationConfig, Mode};
use super::ledger::{UsageLedger, UsageRecord};
use super::message::{AgentMessage, DecisionSummary, MessageBody, MessageStatus, Rejection, RequestKind};
use super::policy::{check_message, validate_decision_summary, PolicyViolation, SummaryViolation};
use super::transcript::{Transcript, TranscriptError, TranscriptHeader};
use crate::backend::{generate_with_retries, AgentBackend, BackendError, GenerateRequest, RequestMeta};
use crate::case::{validate_case, SourceDocument, StructuredCase};
use crate::digest::canonical_hash;
use crate::evidence::{build_query_with, search, CorpusSnapshot, Embedder, SearchError, SearchHit};
use crate::roles::{build_role_packages, AccessMatrix, PackageError, Role, RolePackage};

pub const INSTRUCTION_INITIAL: &str = "Give your independent initial assessment of this case from the perspective of your role. \
Reply with a JSON object of kind \"initial_assessment\" with fields assessment, safety_considerations, uncertainties and citations. \
Cite only evidence entry_ids or patient document doc_ids present in the context.";

pub const INSTRUCTION_DELIBERATION: &str = "Review the transcript. Reply {\"kind\":\"silence\"} unless one of these holds: \
an inter-role conflict, a safety concern, missing critical information, or newly identified decision-relevant evidence. \
In that case reply with a JSON object of kind \"intervention\" with fields trigger (Conflict, SafetyConcern, MissingInfo or NewEvidence), \
directed_to (another role), rationale, content and citations.";

pub const INSTRUCTION_CHAIR: &str = "As chair, reconcile the specialist views and write the decision summary. \
Reply with a JSON object of kind \"chair_summary\" with final_assessment {text, citations}, core_treatment_strategy {text, citations} \
and change_triggers [{condition, citations}]. Every section needs at least one citation to an evidence entry_id or patient doc_id.";

/// Backend routing per role, with a shared default.
#[derive(Clone)]
pub struct Backends<'a> {
    default: &'a dyn AgentBackend,
    overrides: BTreeMap<Role, &'a dyn AgentBackend>,
}

impl<'a> Backends<'a> {
    pub fn single(backend: &'a dyn AgentBackend) -> Self {
        Self {
            default: backend,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_role(mut self, role: Role, backend: &'a dyn AgentBackend) -> Self {
        self.overrides.insert(role, backend);
        self
    }

    pub fn for_role(&self, role: Role) -> &'a dyn AgentBackend {
        self.overrides.get(&role).copied().unwrap_or(self.default)
    }

    pub fn backend_id(&self) -> String {
        let mut id = self.default.backend_id().to_string();
        for (role, b) in &self.overrides {
            id.push_str(&format!(";{role}={}", b.backend_id()));
        }
        id
    }
}

/// Everything a case run reads.
#[derive(Clone, Copy)]
pub struct CaseInputs<'a> {
    pub case: &'a StructuredCase,
    /// Raw documents of the case packet; only those listed in
    /// `case.source_documents` are ever exposed to agents.
    pub documents: &'a [SourceDocument],
    pub snapshot: &'a CorpusSnapshot,
    pub embedder: &'a dyn Embedder,
    pub matrix: &'a AccessMatrix,
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid structured case: {}", .0.join("; "))]
    InvalidCase(Vec<String>),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("backend failure for {role} ({request}): {source}")]
    Backend {
        role: Role,
        request: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("chair summary rejected after {attempts} attempts: {}", .violations.join("; "))]
    SummaryRejected {
        attempts: u32,
        violations: Vec<String>,
        unresolved: Vec<String>,
    },
}

/// A case that did not produce a validated summary. The partial transcript is
/// kept for persistence.
#[derive(Debug)]
pub struct CaseFailure {
    pub case_id: String,
    pub stage: &'static str,
    pub error: ProtocolError,
    pub transcript: Option<Transcript>,
    pub ledger: UsageLedger,
}

impl fmt::Display for CaseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {} failed at {}: {}", self.case_id, self.stage, self.error)
    }
}

impl std::error::Error for CaseFailure {}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub transcript: Transcript,
    pub summary: DecisionSummary,
    pub ledger: UsageLedger,
}

pub fn evidence_context(hits: &[SearchHit], snapshot: &CorpusSnapshot) -> Value {
    Value::Array(
        hits.iter()
            .filter_map(|h| snapshot.entry(&h.entry_id).map(|e| (h, e)))
            .map(|(h, e)| {
                json!({
                    "entry_id": e.entry_id,
                    "stream": e.stream,
                    "title": e.title,
                    "tier": e.tier,
                    "similarity": h.similarity,
                    "text": e.chunk_text,
                })
            })
            .collect(),
    )
}

pub fn documents_context(docs: &[SourceDocument]) -> Value {
    Value::Array(
        docs.iter()
            .map(|d| json!({"doc_id": d.doc_id, "doc_type": d.doc_type, "doc_date": d.doc_date, "body": d.body}))
            .collect(),
    )
}

/// Context of a specialist or chair call in the multi-agent protocol.
pub fn package_context(pkg: &RolePackage, snapshot: &CorpusSnapshot, transcript_view: Value) -> Value {
    json!({
        "role": pkg.role,
        "case": pkg.projection,
        "documents": documents_context(&pkg.documents),
        "evidence": evidence_context(&pkg.evidence, snapshot),
        "transcript": transcript_view,
    })
}

/// Context of the single chair call in a baseline mode. Each mode adds keys
/// to the previous one: case; then evidence; then the document dossier.
pub fn baseline_context(
    mode: Mode,
    case: &StructuredCase,
    documents: &[SourceDocument],
    evidence: &[SearchHit],
    snapshot: &CorpusSnapshot,
) -> Value {
    let mut ctx = serde_json::Map::new();
    ctx.insert("case".into(), serde_json::to_value(case).expect("case serializes"));
    if mode.includes_evidence() {
        ctx.insert("evidence".into(), evidence_context(evidence, snapshot));
    }
    if mode.includes_dossier() {
        let dossier: Vec<SourceDocument> = documents
            .iter()
            .filter(|d| case.document(&d.doc_id).is_some())
            .cloned()
            .collect();
        ctx.insert("documents".into(), documents_context(&dossier));
    }
    Value::Object(ctx)
}

/// Evidence the chair retrieves with its own template.
pub fn chair_evidence(inputs: &CaseInputs<'_>, k: usize) -> Result<Vec<SearchHit>, SearchError> {
    let query = build_query_with(inputs.case, &inputs.matrix.query_template(Role::Chair));
    search(inputs.snapshot, &query, inputs.embedder, k)
}

/// Driver for one case. All transcript mutation goes through here.
pub struct Deliberation<'a> {
    case: &'a StructuredCase,
    snapshot: &'a CorpusSnapshot,
    config: &'a DeliberationConfig,
    backends: &'a Backends<'a>,
    transcript: Transcript,
    ledger: UsageLedger,
}

impl<'a> Deliberation<'a> {
    pub fn new(
        case: &'a StructuredCase,
        snapshot: &'a CorpusSnapshot,
        matrix: &AccessMatrix,
        config: &'a DeliberationConfig,
        backends: &'a Backends<'a>,
    ) -> Self {
        let header = TranscriptHeader {
            case_id: case.case_id.clone(),
            mode: config.mode,
            config_hash: config.config_hash(),
            config: config.clone(),
            snapshot_id: snapshot.snapshot_id().to_string(),
            backend_id: backends.backend_id(),
            matrix_hash: format!("sha256:{}", canonical_hash(matrix)),
        };
        Self {
            case,
            snapshot,
            config,
            backends,
            transcript: Transcript::new(header),
            ledger: UsageLedger::new(case.case_id.clone()),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn into_parts(self) -> (Transcript, UsageLedger) {
        (self.transcript, self.ledger)
    }

    /// One message: generate, check, and regenerate with a violation notice
    /// until accepted or the citation retry budget is spent.
    fn generate(
        &self,
        role: Role,
        request: RequestKind,
        round: u32,
        context: &Value,
    ) -> (Result<AgentMessage, ProtocolError>, Vec<UsageRecord>) {
        let base = match request {
            RequestKind::InitialAssessment => INSTRUCTION_INITIAL,
            RequestKind::Deliberation => INSTRUCTION_DELIBERATION,
            RequestKind::ChairSummary => INSTRUCTION_CHAIR,
        };
        let backend = self.backends.for_role(role);
        let mut usage = Vec::new();
        let mut last: Option<(PolicyViolation, Value)> = None;
        let budget = self.config.citation_retry_budget;
        for attempt in 0..=budget {
            let instruction = match &last {
                Some((v, _)) => format!("{base}\n\n{}", v.notice()),
                None => base.to_string(),
            };
            let req = GenerateRequest {
                role: role.id().to_string(),
                instruction,
                context: context.clone(),
                schema_id: request.schema_id().to_string(),
                meta: RequestMeta {
                    case_id: self.case.case_id.clone(),
                    kind: request.id().to_string(),
                    round,
                    attempt,
                    seed: self.config.seed,
                },
            };
            let resp = match generate_with_retries(backend, &req, self.config.backend_retry_budget) {
                Ok(r) => r,
                Err(source) => {
                    let err = ProtocolError::Backend {
                        role,
                        request: request.id(),
                        source,
                    };
                    return (Err(err), usage);
                }
            };
            usage.push(UsageRecord {
                role: role.id().to_string(),
                request: request.id().to_string(),
                round,
                attempt,
                usage: resp.usage,
            });
            match check_message(
                &resp.message,
                request,
                role,
                self.snapshot,
                self.case,
                &self.config.output_template,
            ) {
                Ok(body) => {
                    let msg = AgentMessage {
                        seq: 0,
                        round,
                        role,
                        request,
                        status: MessageStatus::Accepted,
                        body: Some(body),
                        rejection: None,
                        attempts: attempt + 1,
                    };
                    return (Ok(msg), usage);
                }
                Err(v) => {
                    tracing::debug!(%role, attempt, violations = ?v.violations, unresolved = ?v.unresolved, "message bounced");
                    last = Some((v, resp.message));
                }
            }
        }
        let (v, output) = last.expect("at least one attempt");
        let msg = AgentMessage {
            seq: 0,
            round,
            role,
            request,
            status: MessageStatus::Rejected,
            body: None,
            rejection: Some(Rejection {
                violations: v.violations,
                unresolved_citations: v.unresolved,
                last_output: output,
            }),
            attempts: budget + 1,
        };
        (Ok(msg), usage)
    }

    fn record(&mut self, result: (Result<AgentMessage, ProtocolError>, Vec<UsageRecord>)) -> Result<AgentMessage, ProtocolError> {
        let (msg, usage) = result;
        self.ledger.extend(usage);
        let msg = msg?;
        Ok(self.transcript.push(msg).clone())
    }

    /// Round 0: every role assesses its own package with an empty transcript
    /// view. Calls run concurrently; messages are appended in role order.
    pub fn run_initial_round(&mut self, packages: &BTreeMap<Role, RolePackage>) -> Result<(), ProtocolError> {
        let roles: Vec<Role> = if self.config.chair_initial_assessment {
            Role::ALL.to_vec()
        } else {
            Role::SPECIALISTS.to_vec()
        };
        let this = &*self;
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = roles
                .iter()
                .map(|role| {
                    let ctx = package_context(&packages[role], this.snapshot, Value::Array(vec![]));
                    s.spawn(move || this.generate(*role, RequestKind::InitialAssessment, 0, &ctx))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect()
        });
        let mut first_err = None;
        for r in results {
            if let Err(e) = self.record(r) {
                first_err.get_or_insert(e);
            }
        }
        first_err.map_or(Ok(()), Err)
    }

    /// Polls specialists in the configured order until a round passes without
    /// an accepted intervention or `max_rounds` rounds have run. Returns the
    /// number of rounds run.
    pub fn run_deliberation_rounds(&mut self, packages: &BTreeMap<Role, RolePackage>) -> Result<u32, ProtocolError> {
        let mut rounds = 0;
        for round in 1..=self.config.max_rounds {
            rounds = round;
            let mut intervened = false;
            for role in self.config.polling_order.clone() {
                let ctx = package_context(&packages[&role], self.snapshot, self.transcript.view());
                let msg = self.record(self.generate(role, RequestKind::Deliberation, round, &ctx))?;
                intervened |= matches!(msg.body, Some(MessageBody::Intervention { .. }));
            }
            if !intervened {
                break;
            }
        }
        Ok(rounds)
    }

    /// Chair synthesis over its package and the full accepted transcript.
    pub fn chair_arbitrate(&mut self, chair: &RolePackage, round: u32) -> Result<DecisionSummary, ProtocolError> {
        let ctx = package_context(chair, self.snapshot, self.transcript.view());
        self.summarize(round, &ctx)
    }

    /// Single chair call for the baseline modes.
    pub fn run_baseline(&mut self, context: &Value) -> Result<DecisionSummary, ProtocolError> {
        self.summarize(0, context)
    }

    fn summarize(&mut self, round: u32, ctx: &Value) -> Result<DecisionSummary, ProtocolError> {
        let msg = self.record(self.generate(Role::Chair, RequestKind::ChairSummary, round, ctx))?;
        match (msg.body, msg.rejection) {
            (Some(MessageBody::ChairSummary(y)), _) => Ok(y),
            (_, Some(r)) => Err(ProtocolError::SummaryRejected {
                attempts: msg.attempts,
                violations: r.violations,
                unresolved: r.unresolved_citations,
            }),
            _ => unreachable!("accepted chair summary request carries a summary"),
        }
    }
}

/// Runs one case in the configured mode.
pub fn run_case(
    inputs: CaseInputs<'_>,
    backends: &Backends<'_>,
    config: &DeliberationConfig,
) -> Result<RunOutcome, CaseFailure> {
    let case_id = inputs.case.case_id.clone();
    let fail = |stage, error, d: Option<Deliberation<'_>>| {
        let (transcript, ledger) = match d {
            Some(d) => {
                let (t, l) = d.into_parts();
                (Some(t), l)
            }
            None => (None, UsageLedger::new(case_id.clone())),
        };
        CaseFailure {
            case_id: case_id.clone(),
            stage,
            error,
            transcript,
            ledger,
        }
    };
    if let Err(e) = config.validate() {
        return Err(fail("config", e.into(), None));
    }
    let violations = validate_case(inputs.case);
    if !violations.is_empty() {
        let list = violations.iter().map(|v| format!("{}: {}", v.field, v.message)).collect();
        return Err(fail("validate", ProtocolError::InvalidCase(list), None));
    }

    let mut d = Deliberation::new(inputs.case, inputs.snapshot, inputs.matrix, config, backends);
    let summary = match config.mode {
        Mode::Omgs => {
            let packages = match build_role_packages(
                inputs.case,
                inputs.documents,
                inputs.matrix,
                inputs.snapshot,
                inputs.embedder,
                config.evidence_k,
            ) {
                Ok(p) => p,
                Err(e) => return Err(fail("packages", e.into(), Some(d))),
            };
            if let Err(e) = d.run_initial_round(&packages) {
                return Err(fail("initial_round", e, Some(d)));
            }
            let rounds = match d.run_deliberation_rounds(&packages) {
                Ok(r) => r,
                Err(e) => return Err(fail("deliberation", e, Some(d))),
            };
            match d.chair_arbitrate(&packages[&Role::Chair], rounds) {
                Ok(y) => y,
                Err(e) => return Err(fail("chair_arbitration", e, Some(d))),
            }
        }
        mode => {
            let evidence = if mode.includes_evidence() {
                match chair_evidence(&inputs, config.evidence_k) {
                    Ok(h) => h,
                    Err(e) => return Err(fail("retrieval", e.into(), Some(d))),
                }
            } else {
                Vec::new()
            };
            let ctx = baseline_context(mode, inputs.case, inputs.documents, &evidence, inputs.snapshot);
            match d.run_baseline(&ctx) {
                Ok(y) => y,
                Err(e) => return Err(fail("chair_baseline", e, Some(d))),
            }
        }
    };
    let (transcript, ledger) = d.into_parts();
    Ok(RunOutcome {
        transcript,
        summary,
        ledger,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("config differs from the recorded run in: {}", .0.join(", "))]
    ConfigMismatch(Vec<String>),
    #[error("snapshot {actual} differs from recorded snapshot {recorded}")]
    SnapshotMismatch { recorded: String, actual: String },
    #[error("transcript belongs to case {recorded}, not {actual}")]
    CaseMismatch { recorded: String, actual: String },
    #[error("transcript shape: {}", .0.join("; "))]
    Shape(Vec<String>),
    #[error("message {seq} fails re-validation: {}", .violations.join("; "))]
    Message { seq: u32, violations: Vec<String> },
    #[error("decision summary invalid: {0:?}")]
    InvalidSummary(Vec<SummaryViolation>),
}

/// Re-derives the decision summary from a persisted transcript without any
/// backend call: the hash chain, the recorded config, the snapshot and every
/// accepted message are re-checked, then the final summary is re-validated.
pub fn replay_transcript(
    jsonl: &str,
    config: &DeliberationConfig,
    snapshot: &CorpusSnapshot,
    case: &StructuredCase,
) -> Result<DecisionSummary, ReplayError> {
    let t = Transcript::from_jsonl(jsonl)?;
    if t.header.config_hash != config.config_hash() {
        return Err(ReplayError::ConfigMismatch(t.header.config.diff(config)));
    }
    if t.header.snapshot_id != snapshot.snapshot_id() {
        return Err(ReplayError::SnapshotMismatch {
            recorded: t.header.snapshot_id.clone(),
            actual: snapshot.snapshot_id().to_string(),
        });
    }
    if t.header.case_id != case.case_id {
        return Err(ReplayError::CaseMismatch {
            recorded: t.header.case_id.clone(),
            actual: case.case_id.clone(),
        });
    }
    let shape = t.check_shape();
    if !shape.is_empty() {
        return Err(ReplayError::Shape(shape));
    }
    for m in t.accepted() {
        let raw = serde_json::to_value(m.body.as_ref().expect("accepted message has a body")).expect("body serializes");
        if let Err(v) = check_message(&raw, m.request, m.role, snapshot, case, &config.output_template) {
            let mut violations = v.violations;
            violations.extend(v.unresolved.into_iter().map(|id| format!("unresolved citation {id}")));
            return Err(ReplayError::Message { seq: m.seq, violations });
        }
    }
    let y = t.final_summary().expect("shape check guarantees a final summary").clone();
    let report = validate_decision_summary(&y, snapshot, case, &config.output_template);
    if !report.is_valid() {
        return Err(ReplayError::InvalidSummary(report.violations));
    }
    Ok(y)
}
