//! Text embeddings and cosine similarity.
//!
//! [`OfflineEmbedder`] is a deterministic hashed bag-of-tokens model that needs
//! no download; [`RemoteEmbedder`] calls an HTTP endpoint. [`CachedEmbedder`]
//! memoizes either by exact input text.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("malformed embedding response: {0}")]
    MalformedResponse(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        EmbeddingVector::new(self.values.iter().map(|v| v * c).collect())
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped into `[-1, 1]` against rounding. Never
/// returns negative zero.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    // Adding +0.0 turns a -0.0 result into +0.0, so orthogonal vectors tie
    // under total ordering.
    Ok((dot / (na * nb)).clamp(-1.0, 1.0) + 0.0)
}

pub trait Embedder: Send + Sync {
    /// Identifies the model; reference databases record it.
    fn id(&self) -> String;

    fn embed_raw(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    /// Empty input is replaced by a single space.
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.is_empty() {
            self.embed_raw(" ")
        } else {
            self.embed_raw(text)
        }
    }
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn embed_raw(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        (**self).embed_raw(text)
    }
}

pub const OFFLINE_DIMENSION: usize = 256;

/// 64-bit FNV-1a over UTF-8 bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Hashes each token into one of 256 buckets, sums and L2-normalizes.
/// Text without tokens maps to the bucket of the empty token.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineEmbedder;

impl Embedder for OfflineEmbedder {
    fn id(&self) -> String {
        format!("offline-fnv1a-{OFFLINE_DIMENSION}")
    }

    fn embed_raw(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut values = vec![0.0; OFFLINE_DIMENSION];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            values[(fnv1a64(b"") % OFFLINE_DIMENSION as u64) as usize] = 1.0;
        } else {
            for t in &tokens {
                values[(fnv1a64(t.as_bytes()) % OFFLINE_DIMENSION as u64) as usize] += 1.0;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(EmbeddingVector::new(values.into_iter().map(|v| v / norm).collect()))
    }
}

/// HTTP embedder. Accepts either a bare JSON float array or an
/// OpenAI-style `{"data": [{"embedding": [...]}]}` response.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client");
        RemoteEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            client,
        }
    }
}

fn parse_embedding_response(v: &serde_json::Value) -> Option<Vec<f64>> {
    let arr = match v {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(o) => o
            .get("data")
            .and_then(|d| d.get(0))
            .and_then(|d| d.get("embedding"))
            .or_else(|| o.get("embedding"))?
            .as_array()?,
        _ => return None,
    };
    arr.iter().map(serde_json::Value::as_f64).collect()
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn embed_raw(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| EmbedError::ProviderUnreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EmbedError::ProviderUnreachable(format!(
                "status {}",
                resp.status()
            )));
        }
        let body: serde_json::Value = resp
            .json()
            .map_err(|e| EmbedError::MalformedResponse(e.to_string()))?;
        let values = parse_embedding_response(&body)
            .ok_or_else(|| EmbedError::MalformedResponse("no float array".into()))?;
        if values.is_empty() {
            return Err(EmbedError::MalformedResponse("empty vector".into()));
        }
        Ok(EmbeddingVector::new(values))
    }
}

/// Memoizes embeddings by exact text. Concurrent readers, serialized inserts.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: RwLock<HashMap<String, EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        CachedEmbedder {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed_raw(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if let Some(v) = self.cache.read().expect("cache lock").get(text) {
            return Ok(v.clone());
        }
        let v = self.inner.embed_raw(text)?;
        self.cache
            .write()
            .expect("cache lock")
            .entry(text.to_owned())
            .or_insert_with(|| v.clone());
        Ok(v)
    }
}
