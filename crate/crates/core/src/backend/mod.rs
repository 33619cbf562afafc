//! Agent backend contract.
//!
//! Every agent call, whether a specialist assessment, a chair arbitration or a
//! document extraction, goes through [`AgentBackend::generate`] with a
//! [`GenerateRequest`]. The wire shape is the same for every backend, so a
//! recorded HTTP session can be replayed by [`ScriptedBackend`].

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::digest::canonical_hash;

mod http;
mod scripted;

pub use http::{HttpBackend, CREDENTIALS_ENV};
pub use scripted::{RecordingBackend, ReplayEntry, ReplayScript, ScriptedBackend, Selector};

/// Per-call metadata. Not part of the prompt, but part of the fingerprint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub case_id: String,
    /// Message kind requested, e.g. `initial_assessment`, `deliberation`, `chair_summary`.
    pub kind: String,
    pub round: u32,
    pub attempt: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub role: String,
    pub instruction: String,
    pub context: Value,
    pub schema_id: String,
    pub meta: RequestMeta,
}

impl GenerateRequest {
    /// Stable SHA-256 of the canonical request serialization.
    pub fn fingerprint(&self) -> String {
        canonical_hash(self)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_ms: u64,
}

impl Usage {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub message: Value,
    pub usage: Usage,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("no scripted response for role {role} kind {kind} (fingerprint {fingerprint})")]
    NoScript {
        role: String,
        kind: String,
        fingerprint: String,
    },
    #[error("backend returned an invalid envelope: {0}")]
    InvalidResponse(String),
    #[error("replay script {path}: {message}")]
    Script { path: String, message: String },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { retryable: true, .. })
    }
}

pub trait AgentBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, BackendError>;
}

impl<B: AgentBackend + ?Sized> AgentBackend for std::sync::Arc<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, BackendError> {
        (**self).generate(request)
    }
}

impl<B: AgentBackend + ?Sized> AgentBackend for &B {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, BackendError> {
        (**self).generate(request)
    }
}

/// Calls `backend`, retrying transport failures flagged retryable up to
/// `retries` extra times.
pub fn generate_with_retries(
    backend: &dyn AgentBackend,
    request: &GenerateRequest,
    retries: u32,
) -> Result<GenerateResponse, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.generate(request) {
            Err(e) if e.is_retryable() && attempt < retries => {
                tracing::warn!(role = %request.role, attempt, error = %e, "retrying backend call");
                attempt += 1;
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: AtomicU32,
    }

    impl AgentBackend for Flaky {
        fn backend_id(&self) -> &str {
            "flaky"
        }

        fn generate(&self, _: &GenerateRequest) -> Result<GenerateResponse, BackendError> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(BackendError::Transport {
                    message: "503".into(),
                    retryable: true,
                });
            }
            Ok(GenerateResponse {
                message: Value::Null,
                usage: Usage::default(),
            })
        }
    }

    fn req() -> GenerateRequest {
        GenerateRequest {
            role: "chair".into(),
            instruction: "x".into(),
            context: Value::Null,
            schema_id: "s".into(),
            meta: RequestMeta::default(),
        }
    }

    #[test]
    fn retries_are_bounded() {
        let b = Flaky {
            failures: AtomicU32::new(2),
        };
        assert!(generate_with_retries(&b, &req(), 2).is_ok());
        let b = Flaky {
            failures: AtomicU32::new(3),
        };
        assert!(generate_with_retries(&b, &req(), 2).is_err());
    }

    #[test]
    fn fingerprint_changes_with_attempt() {
        let a = req();
        let mut b = req();
        b.meta.attempt = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), req().fingerprint());
    }
}
