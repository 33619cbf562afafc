//! Multi-agent tumour-board deliberation engine.
//!
//! The crate is organised along the decision pipeline:
//!
//! - [`case`] turns raw case packets into a schema-normalized [`case::StructuredCase`]
//!   with document-level provenance and an explicit `Unknown` sentinel.
//! - [`evidence`] builds and queries frozen, content-addressed evidence snapshots.
//! - [`roles`] packages role-scoped inputs for each agent.
//! - [`backend`] abstracts over agent backends (scripted replay, HTTP).
//! - [`deliberation`] runs the three-phase protocol and the single-agent baselines.
//! - [`spear`] and [`audit`] implement the rubric arithmetic and citation-fidelity capping.

pub mod audit;
pub mod backend;
pub mod case;
pub mod digest;
pub mod deliberation;
pub mod evidence;
pub mod roles;
pub mod spear;

pub use audit::{apply_evidence_cap, AuditRecord, CapClass, CitationScope, Verdict};
pub use backend::{AgentBackend, GenerateRequest, GenerateResponse, Usage};
pub use case::{ClinicalScene, RawCaseRecord, SourceDocument, StructuredCase};
pub use deliberation::{DecisionSummary, DeliberationConfig, Mode, Transcript};
pub use evidence::{CorpusSnapshot, EvidenceEntry};
pub use roles::{AccessMatrix, Role, RolePackage};
pub use spear::{GatedOverall, SpearScore};
