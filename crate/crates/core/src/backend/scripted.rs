use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AgentBackend, BackendError, GenerateRequest, GenerateResponse, Usage};

/// Partial match on request fields. Unset selectors match anything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_id: Option<String>,
}

impl Selector {
    pub fn role(role: impl Into<String>) -> Self {
        Self {
            role: Some(role.into()),
            ..Self::default()
        }
    }

    pub fn kind(mut self, kind: impl Into<String>) -> Self {
        self.kind = Some(kind.into());
        self
    }

    pub fn case(mut self, case_id: impl Into<String>) -> Self {
        self.case_id = Some(case_id.into());
        self
    }

    pub fn round(mut self, round: u32) -> Self {
        self.round = Some(round);
        self
    }

    pub fn attempt(mut self, attempt: u32) -> Self {
        self.attempt = Some(attempt);
        self
    }

    fn matches(&self, req: &GenerateRequest) -> bool {
        fn eq<T: PartialEq>(want: &Option<T>, got: &T) -> bool {
            want.as_ref().is_none_or(|w| w == got)
        }
        eq(&self.role, &req.role)
            && eq(&self.kind, &req.meta.kind)
            && eq(&self.case_id, &req.meta.case_id)
            && eq(&self.round, &req.meta.round)
            && eq(&self.attempt, &req.meta.attempt)
            && eq(&self.schema_id, &req.schema_id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayEntry {
    /// Exact request fingerprint; takes precedence over selector matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default)]
    pub when: Selector,
    pub message: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

impl ReplayEntry {
    pub fn when(when: Selector, message: Value) -> Self {
        Self {
            fingerprint: None,
            when,
            message,
            usage: None,
        }
    }

    pub fn with_usage(mut self, usage: Usage) -> Self {
        self.usage = Some(usage);
        self
    }
}

/// On-disk replay file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayScript {
    pub backend_id: String,
    #[serde(default)]
    pub default_usage: Usage,
    pub entries: Vec<ReplayEntry>,
}

impl ReplayScript {
    pub fn new(backend_id: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            default_usage: Usage::default(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: ReplayEntry) -> &mut Self {
        self.entries.push(entry);
        self
    }
}

/// Deterministic backend answering from a [`ReplayScript`].
///
/// Lookup order: exact fingerprint, then the first entry (in file order) whose
/// selector matches. String values of the form `$evidence[i]`, `$document[i]`
/// and `$source[i]` in a scripted message are replaced by the i-th evidence
/// entry id, permitted document id, or case source-document id found in the
/// request context; unresolvable placeholders are left as-is.
///
/// Every request is recorded and can be inspected with [`ScriptedBackend::recorded`].
pub struct ScriptedBackend {
    script: ReplayScript,
    recorded: Mutex<Vec<GenerateRequest>>,
}

impl ScriptedBackend {
    pub fn new(script: ReplayScript) -> Self {
        Self {
            script,
            recorded: Mutex::new(Vec::new()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Script {
            path: path.display().to_string(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        let script = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        Ok(Self::new(script))
    }

    pub fn script(&self) -> &ReplayScript {
        &self.script
    }

    pub fn recorded(&self) -> Vec<GenerateRequest> {
        self.recorded.lock().expect("recorder poisoned").clone()
    }

    fn lookup(&self, request: &GenerateRequest) -> Option<&ReplayEntry> {
        let fingerprint = request.fingerprint();
        self.script
            .entries
            .iter()
            .find(|e| e.fingerprint.as_deref() == Some(fingerprint.as_str()))
            .or_else(|| {
                self.script
                    .entries
                    .iter()
                    .find(|e| e.fingerprint.is_none() && e.when.matches(request))
            })
    }
}

impl AgentBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.script.backend_id
    }

    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, BackendError> {
        self.recorded.lock().expect("recorder poisoned").push(request.clone());
        let entry = self.lookup(request).ok_or_else(|| BackendError::NoScript {
            role: request.role.clone(),
            kind: request.meta.kind.clone(),
            fingerprint: request.fingerprint(),
        })?;
        let mut message = entry.message.clone();
        substitute_placeholders(&mut message, &request.context);
        Ok(GenerateResponse {
            message,
            usage: entry.usage.unwrap_or(self.script.default_usage),
        })
    }
}

fn substitute_placeholders(value: &mut Value, context: &Value) {
    match value {
        Value::String(s) => {
            if let Some(id) = resolve_placeholder(s, context) {
                *s = id;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| substitute_placeholders(v, context)),
        Value::Object(map) => map.values_mut().for_each(|v| substitute_placeholders(v, context)),
        _ => {}
    }
}

fn resolve_placeholder(s: &str, context: &Value) -> Option<String> {
    let rest = s.strip_prefix('$')?;
    let (name, index) = rest.strip_suffix(']')?.split_once('[')?;
    let index: usize = index.parse().ok()?;
    let (list, key) = match name {
        "evidence" => (context.get("evidence")?, "entry_id"),
        "document" => (context.get("documents")?, "doc_id"),
        "source" => (context.get("case")?.get("source_documents")?, "doc_id"),
        _ => return None,
    };
    list.get(index)?.get(key)?.as_str().map(str::to_string)
}

/// Wraps another backend and captures every exchange as a fingerprinted
/// [`ReplayEntry`], so a live session can be replayed offline.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<ReplayEntry>>,
}

impl<B: AgentBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn into_script(self) -> ReplayScript {
        ReplayScript {
            backend_id: self.inner.backend_id().to_string(),
            default_usage: Usage::default(),
            entries: self.entries.into_inner().expect("recorder poisoned"),
        }
    }
}

impl<B: AgentBackend> AgentBackend for RecordingBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, BackendError> {
        let response = self.inner.generate(request)?;
        self.entries.lock().expect("recorder poisoned").push(ReplayEntry {
            fingerprint: Some(request.fingerprint()),
            when: Selector::default(),
            message: response.message.clone(),
            usage: Some(response.usage),
        });
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::RequestMeta;
    use serde_json::json;

    fn request(role: &str, attempt: u32) -> GenerateRequest {
        GenerateRequest {
            role: role.into(),
            instruction: "assess".into(),
            context: json!({
                "evidence": [{"entry_id": "EB-1"}, {"entry_id": "EB-2"}],
                "documents": [{"doc_id": "D-1"}],
            }),
            schema_id: "initial_assessment.v1".into(),
            meta: RequestMeta {
                case_id: "C1".into(),
                kind: "initial_assessment".into(),
                round: 0,
                attempt,
                seed: 0,
            },
        }
    }

    #[test]
    fn selector_precedence_and_placeholders() {
        let mut script = ReplayScript::new("scripted:test");
        script
            .push(ReplayEntry::when(
                Selector::role("radiologist").attempt(1),
                json!({"citations": ["$evidence[1]"]}),
            ))
            .push(ReplayEntry::when(
                Selector::role("radiologist"),
                json!({"citations": ["$evidence[0]", "$document[0]", "$document[5]"]}),
            ));
        let b = ScriptedBackend::new(script);
        let first = b.generate(&request("radiologist", 0)).unwrap();
        assert_eq!(first.message, json!({"citations": ["EB-1", "D-1", "$document[5]"]}));
        let retry = b.generate(&request("radiologist", 1)).unwrap();
        assert_eq!(retry.message, json!({"citations": ["EB-2"]}));
        assert!(matches!(
            b.generate(&request("pathologist", 0)),
            Err(BackendError::NoScript { .. })
        ));
        assert_eq!(b.recorded().len(), 3);
    }

    #[test]
    fn recording_replays_by_fingerprint() {
        let mut script = ReplayScript::new("scripted:inner");
        script.push(
            ReplayEntry::when(Selector::default(), json!({"ok": true})).with_usage(Usage {
                prompt_tokens: 10,
                completion_tokens: 5,
                wall_ms: 7,
            }),
        );
        let rec = RecordingBackend::new(ScriptedBackend::new(script));
        let live = rec.generate(&request("chair", 0)).unwrap();
        let replay = ScriptedBackend::new(rec.into_script());
        assert_eq!(replay.generate(&request("chair", 0)).unwrap(), live);
        assert!(replay.generate(&request("chair", 1)).is_err());
    }
}
