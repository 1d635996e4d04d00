//! Unit-norm sentence embeddings behind a pluggable provider.
//!
//! Two providers are available: [`RemoteEmbedder`] speaks the common
//! embeddings HTTP convention (JSON body with `model` + `input` list, one
//! vector per input in the response), and [`HashedEmbedder`] is a
//! dependency-free deterministic token-hash embedder used for tests and
//! offline runs. Both normalize their output to unit L2 norm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bucket count of the hashed local embedder.
pub const HASHED_DIMENSION: usize = 256;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embeddings endpoint error: {0}")]
    Remote(String),
    #[error("malformed embeddings response: {0}")]
    MalformedResponse(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
}

/// A fixed-dimension real vector with unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalize raw values to unit norm. An all-zero input maps to the
    /// first basis vector so the result is always well-formed.
    pub fn from_unnormalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        } else if !values.is_empty() {
            values[0] = 1.0;
        }
        EmbeddingVector { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dot product of two unit vectors, clamped into [-1, 1].
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if u.dimension() != v.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let dot: f64 = u
        .values
        .iter()
        .zip(v.values.iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Cosine distance `1 - cosine_similarity`, range [0, 2].
pub fn cosine_distance(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

/// Source of unit-norm sentence embeddings. Implementations must be
/// deterministic: the same text yields the same vector for the lifetime of
/// the provider.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Embed a batch of texts, one unit-norm vector per text, order
    /// preserved. Batching must not change results relative to one-at-a-time
    /// calls.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    /// Stable description used in stage input hashes.
    fn fingerprint(&self) -> String;
}

// 64-bit FNV-1a; stable across platforms and Rust versions, unlike the
// std hasher.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic local embedder: lowercase, split on non-alphanumerics,
/// hash each token into one of `dimension` buckets, count, L2-normalize.
/// Zero-token text maps to the first basis vector.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dimension: usize,
}

impl HashedEmbedder {
    pub fn new() -> Self {
        Self::with_dimension(HASHED_DIMENSION)
    }

    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension >= 1, "embedder dimension must be positive");
        HashedEmbedder { dimension }
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut buckets = vec![0.0f64; self.dimension];
        let lowered = text.to_lowercase();
        for token in lowered.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            let bucket = (fnv1a64(token.as_bytes()) % self.dimension as u64) as usize;
            buckets[bucket] += 1.0;
        }
        EmbeddingVector::from_unnormalized(buckets)
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn fingerprint(&self) -> String {
        format!("hashed-local/d{}", self.dimension)
    }
}

#[derive(Serialize)]
struct RemoteEmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct RemoteEmbeddingResponse {
    data: Vec<RemoteEmbeddingRow>,
}

#[derive(Deserialize)]
struct RemoteEmbeddingRow {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

/// Client for a hosted embeddings endpoint. Transport failures and server
/// errors are retried with exponential backoff before surfacing.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key_env: String,
    dimension: usize,
    batch_size: usize,
    retry_attempts: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: String,
        model: String,
        api_key_env: String,
        dimension: usize,
        batch_size: usize,
        timeout: std::time::Duration,
    ) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbeddingError::Remote(e.to_string()))?;
        Ok(RemoteEmbedder {
            endpoint,
            model,
            api_key_env,
            dimension,
            batch_size: batch_size.max(1),
            retry_attempts: 3,
            client,
        })
    }

    fn api_key(&self) -> Result<String, EmbeddingError> {
        std::env::var(&self.api_key_env)
            .map_err(|_| EmbeddingError::MissingApiKey(self.api_key_env.clone()))
    }

    fn post_chunk(&self, chunk: &[&str], key: &str) -> Result<RemoteEmbeddingResponse, EmbeddingError> {
        let body = RemoteEmbeddingRequest {
            model: &self.model,
            input: chunk,
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| EmbeddingError::Remote(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(EmbeddingError::Remote(format!("HTTP {status}: {text}")));
        }
        response
            .json()
            .map_err(|e| EmbeddingError::MalformedResponse(e.to_string()))
    }

    fn embed_chunk(&self, chunk: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let key = self.api_key()?;
        let mut outcome = self.post_chunk(chunk, &key);
        for attempt in 1..self.retry_attempts {
            match &outcome {
                Err(EmbeddingError::Remote(_)) => {
                    std::thread::sleep(std::time::Duration::from_millis(
                        100 * 2u64.pow(attempt as u32 - 1),
                    ));
                    outcome = self.post_chunk(chunk, &key);
                }
                _ => break,
            }
        }
        let parsed = outcome?;
        if parsed.data.len() != chunk.len() {
            return Err(EmbeddingError::MalformedResponse(format!(
                "expected {} vectors, got {}",
                chunk.len(),
                parsed.data.len()
            )));
        }
        let mut rows = parsed.data;
        rows.sort_by_key(|r| r.index.unwrap_or(usize::MAX));
        rows.iter()
            .map(|row| {
                if row.embedding.len() != self.dimension {
                    return Err(EmbeddingError::DimensionMismatch {
                        left: self.dimension,
                        right: row.embedding.len(),
                    });
                }
                Ok(EmbeddingVector::from_unnormalized(row.embedding.clone()))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }

    fn fingerprint(&self) -> String {
        format!(
            "remote/{}@{}/d{}",
            self.model, self.endpoint, self.dimension
        )
    }
}
