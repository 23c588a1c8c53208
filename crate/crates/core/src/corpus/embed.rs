use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::wire::{WireClient, WireError};

/// A dense embedding. All vectors in one index share a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimsMismatch { expected: usize, found: usize },
    #[error("provider returned {found} vectors for {expected} inputs")]
    CountMismatch { expected: usize, found: usize },
    #[error("provider returned a non-finite embedding")]
    NonFinite,
    #[error("embedding provider error: {0}")]
    Provider(String),
}

impl EmbedError {
    /// Transport failures may succeed on a later call; everything else is fatal.
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Transport { .. })
    }
}

pub trait Embedder: Send + Sync {
    /// Identifies the embedding space; stored with index snapshots.
    fn id(&self) -> String;
    fn dims(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

/// Embeds `texts` and checks count, dimension and finiteness of the result.
pub fn embed_texts(texts: &[String], provider: &dyn Embedder) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let vectors = provider.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch {
            expected: texts.len(),
            found: vectors.len(),
        });
    }
    let dims = provider.dims();
    for v in &vectors {
        if v.dims() != dims {
            return Err(EmbedError::DimsMismatch {
                expected: dims,
                found: v.dims(),
            });
        }
        if !v.is_finite() {
            return Err(EmbedError::NonFinite);
        }
    }
    Ok(vectors)
}

/// Offline, deterministic embedder: signed feature hashing of character
/// trigrams into a fixed number of dimensions, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dims: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(64, 0x5eed)
    }
}

impl HashEmbedder {
    pub fn new(dims: usize, seed: u64) -> HashEmbedder {
        assert!(dims > 0, "embedding dimension must be positive");
        HashEmbedder { dims, seed }
    }

    fn bucket(&self, gram: &str) -> (usize, f64) {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(gram.as_bytes());
        let d = h.finalize();
        let word = u64::from_le_bytes(d[..8].try_into().unwrap());
        let sign = if word >> 63 == 0 { 1.0 } else { -1.0 };
        ((word % self.dims as u64) as usize, sign)
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(text.to_lowercase().chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut v = vec![0.0f64; self.dims];
        let mut gram = String::new();
        for w in padded.windows(3) {
            gram.clear();
            gram.extend(w);
            let (i, s) = self.bucket(&gram);
            v[i] += s;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Fully cancelled or empty input still needs a usable direction.
            let (i, _) = self.bucket("");
            v[i] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector(v)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-trigram:{}:{}", self.dims, self.seed)
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Embedder backed by an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct WireEmbedder {
    client: WireClient,
    model: String,
    dims: usize,
}

impl WireEmbedder {
    pub fn new(client: WireClient, model: impl Into<String>, dims: usize) -> WireEmbedder {
        WireEmbedder {
            client,
            model: model.into(),
            dims,
        }
    }
}

impl Embedder for WireEmbedder {
    fn id(&self) -> String {
        format!("wire:{}:{}", self.model, self.dims)
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = json!({ "model": self.model, "input": texts, "dimensions": self.dims });
        let resp = self.client.post_json("embeddings", &body).map_err(|e| match e {
            WireError::Transport { attempts, message } => EmbedError::Transport { attempts, message },
            other => EmbedError::Provider(other.to_string()),
        })?;
        let data = resp["data"]
            .as_array()
            .ok_or_else(|| EmbedError::Provider("response has no data array".into()))?;
        let mut rows: Vec<(u64, EmbeddingVector)> = data
            .iter()
            .map(|item| {
                let index = item["index"].as_u64().unwrap_or(0);
                let values = item["embedding"]
                    .as_array()
                    .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                    .unwrap_or_default();
                (index, EmbeddingVector(values))
            })
            .collect();
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimsMismatch(usize, usize),
    #[error("undefined similarity: zero vector")]
    ZeroVector,
}

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimsMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(SimilarityError::ZeroVector));
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 0.0]), Err(SimilarityError::DimsMismatch(1, 2)));
    }

    #[test]
    fn hash_embedder_deterministic_and_distinct() {
        let e = HashEmbedder::default();
        let a = embed_texts(&["same".into(), "same".into()], &e).unwrap();
        assert_eq!(a[0], a[1]);
        let xy = embed_texts(&["x".into(), "y".into()], &e).unwrap();
        assert!(xy[0].values().iter().zip(xy[1].values()).any(|(p, q)| p != q));
        assert!(embed_texts(&[], &e).unwrap().is_empty());
        assert_eq!(a[0].dims(), 64);
    }

    #[test]
    fn hash_embedder_unit_norm_even_for_empty_text() {
        let e = HashEmbedder::default();
        for t in ["", "tutoring", "Turning on Cameras"] {
            let v = e.embed_one(t);
            let n: f64 = v.values().iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    struct BadDims;
    impl Embedder for BadDims {
        fn id(&self) -> String {
            "bad".into()
        }
        fn dims(&self) -> usize {
            4
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            Ok(texts.iter().map(|_| EmbeddingVector(vec![1.0; 3])).collect())
        }
    }

    #[test]
    fn dims_mismatch_is_fatal() {
        let err = embed_texts(&["a".into()], &BadDims).unwrap_err();
        assert!(matches!(err, EmbedError::DimsMismatch { expected: 4, found: 3 }));
        assert!(!err.is_retryable());
    }
}
