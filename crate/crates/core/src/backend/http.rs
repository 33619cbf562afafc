use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::Value;

use super::{AgentBackend, BackendError, GenerateRequest, GenerateResponse, Usage};

/// Bearer token for HTTP backends.
pub const CREDENTIALS_ENV: &str = "OMGS_BACKEND_TOKEN";

/// POSTs each request as JSON to a single generate endpoint.
///
/// The endpoint receives `{role, instruction, context, schema_id, meta}` and
/// must answer `{message, usage: {prompt_tokens, completion_tokens}}`.
/// `wall_ms` is always measured client-side.
pub struct HttpBackend {
    id: String,
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct Envelope {
    message: Value,
    usage: RemoteUsage,
}

#[derive(Deserialize)]
struct RemoteUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>) -> Self {
        let url = url.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(600)))
            .http_status_as_error(true)
            .build()
            .into();
        Self {
            id: format!("http:{url}"),
            url,
            token: std::env::var(CREDENTIALS_ENV).ok().filter(|t| !t.is_empty()),
            agent,
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }
}

impl AgentBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, BackendError> {
        let started = Instant::now();
        let mut call = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call
            .content_type("application/json")
            .send(&crate::digest::canonical_json(request)[..])
            .map_err(transport_error)?;
        let envelope: Envelope = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        Ok(GenerateResponse {
            message: envelope.message,
            usage: Usage {
                prompt_tokens: envelope.usage.prompt_tokens,
                completion_tokens: envelope.usage.completion_tokens,
                wall_ms: started.elapsed().as_millis() as u64,
            },
        })
    }
}

fn transport_error(e: ureq::Error) -> BackendError {
    let retryable = match &e {
        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
        ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed => true,
        _ => false,
    };
    BackendError::Transport {
        message: e.to_string(),
        retryable,
    }
}
