use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedder {embedder_id} returned dimension {got}, declared {declared}")]
    DimensionMismatch {
        embedder_id: String,
        declared: usize,
        got: usize,
    },
    #[error("embedder {embedder_id} returned {got} vectors for {expected} texts")]
    CountMismatch {
        embedder_id: String,
        expected: usize,
        got: usize,
    },
    #[error("embedder declares dimension 0")]
    ZeroDimension,
    #[error("remote embedder failure: {message}")]
    Remote { message: String, retryable: bool },
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Remote { retryable: true, .. })
    }
}

pub trait Embedder: Send + Sync {
    fn embedder_id(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Raw vectors, one per text; normalization is applied by [`embed`].
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

/// Embeds `texts` and L2-normalizes each vector. All-zero vectors (texts
/// without tokens) are returned unchanged.
pub fn embed(texts: &[&str], embedder: &dyn Embedder) -> Result<Vec<Vec<f32>>, EmbedError> {
    let declared = embedder.dimension();
    if declared == 0 {
        return Err(EmbedError::ZeroDimension);
    }
    let mut vectors = embedder.embed_batch(texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch {
            embedder_id: embedder.embedder_id().to_string(),
            expected: texts.len(),
            got: vectors.len(),
        });
    }
    for v in &mut vectors {
        if v.len() != declared {
            return Err(EmbedError::DimensionMismatch {
                embedder_id: embedder.embedder_id().to_string(),
                declared,
                got: v.len(),
            });
        }
        let norm = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x = (f64::from(*x) / norm) as f32);
        }
    }
    Ok(vectors)
}

/// Dot product in f64; equals cosine similarity for unit vectors.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Offline embedder: lowercase alphanumeric tokens are hashed (FNV-1a) into
/// `dimension` buckets and counted.
#[derive(Clone, Debug)]
pub struct TokenHashEmbedder {
    id: String,
    dimension: usize,
}

impl TokenHashEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize) -> Self {
        Self {
            id: format!("token-hash-bag/fnv1a/{dimension}"),
            dimension,
        }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % self.dimension as u64) as usize
    }

    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }
}

impl Default for TokenHashEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

impl Embedder for TokenHashEmbedder {
    fn embedder_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut v = vec![0f32; self.dimension];
                for token in Self::tokens(text) {
                    v[self.bucket(&token)] += 1.0;
                }
                v
            })
            .collect())
    }
}

/// Remote embedder: POST `{"texts": [...]}` → `{"embeddings": [[...], ...]}`.
pub struct HttpEmbedder {
    id: String,
    url: String,
    dimension: usize,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

impl HttpEmbedder {
    pub fn new(embedder_id: impl Into<String>, url: impl Into<String>, dimension: usize) -> Self {
        Self {
            id: embedder_id.into(),
            url: url.into(),
            dimension,
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(120)))
                .build()
                .into(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embedder_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { texts })
            .map_err(|e| EmbedError::Remote {
                retryable: !matches!(e, ureq::Error::StatusCode(code) if code < 500 && code != 429),
                message: e.to_string(),
            })?;
        let body: EmbedResponse = resp.body_mut().read_json().map_err(|e| EmbedError::Remote {
            message: e.to_string(),
            retryable: false,
        })?;
        Ok(body.embeddings)
    }
}
