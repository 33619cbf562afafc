use std::path::Path;

use anyhow::{bail, Context};
use omgs_core::backend::{AgentBackend, HttpBackend, ScriptedBackend};
use omgs_core::evidence::{Embedder, HttpEmbedder, TokenHashEmbedder};

/// Parses `scripted:<file>` or `http:<url>`. Credentials for HTTP backends
/// come from the `OMGS_BACKEND_TOKEN` environment variable.
pub fn open_backend(spec: &str) -> anyhow::Result<Box<dyn AgentBackend>> {
    if let Some(path) = spec.strip_prefix("scripted:") {
        let b = ScriptedBackend::from_file(Path::new(path)).with_context(|| format!("loading replay script {path}"))?;
        return Ok(Box::new(b));
    }
    if let Some(rest) = spec.strip_prefix("http:") {
        let url = if rest.starts_with("//") { spec.to_string() } else { rest.to_string() };
        return Ok(Box::new(HttpBackend::new(url)));
    }
    if spec.starts_with("https:") {
        return Ok(Box::new(HttpBackend::new(spec)));
    }
    bail!("unknown backend {spec:?}; expected scripted:<file> or http:<url>")
}

/// The embedder a snapshot was frozen with. Hash-bag embedders are rebuilt
/// locally; any other id needs `url`.
pub fn open_embedder(embedder_id: &str, dimension: usize, url: Option<&str>) -> anyhow::Result<Box<dyn Embedder>> {
    let local = TokenHashEmbedder::new(dimension);
    if local.embedder_id() == embedder_id {
        return Ok(Box::new(local));
    }
    match url {
        Some(u) => Ok(Box::new(HttpEmbedder::new(embedder_id, u, dimension))),
        None => bail!("snapshot embedder {embedder_id:?} is remote; pass --embedder-url"),
    }
}
