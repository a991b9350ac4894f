//! Text embeddings and cosine similarity.
//!
//! Providers return raw vectors through [`EmbeddingProvider::raw_embedding`];
//! [`embed`] validates the dimension, rejects non-finite components and
//! L2-normalizes. Blank text never reaches the provider and maps to the
//! all-zero sentinel, whose cosine against anything is 0.

mod hash;
#[cfg(feature = "http")]
mod http;

use serde::{Deserialize, Serialize};

pub use hash::{HashEmbedder, DEFAULT_DIMENSION};
#[cfg(feature = "http")]
pub use http::HttpEmbedder;

use crate::Execution;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding contains non-finite components")]
    NonFinite,
}

/// An L2-normalized embedding, or the all-zero sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values`. A vector with zero norm becomes the zero sentinel.
    pub fn normalized(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Ok(Embedding(vec![0.0; values.len()]));
        }
        Ok(Embedding(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn zero(dimension: usize) -> Self {
        Embedding(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Normalized mean of `embeddings` (zero sentinel if they cancel out).
    pub fn centroid(embeddings: &[Embedding]) -> Result<Self, EmbeddingError> {
        let Some(first) = embeddings.first() else {
            return Err(EmbeddingError::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        };
        let dim = first.dimension();
        let mut sum = vec![0.0; dim];
        for e in embeddings {
            check_dims(dim, e.dimension())?;
            for (s, v) in sum.iter_mut().zip(&e.0) {
                *s += v;
            }
        }
        Embedding::normalized(sum)
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingProviderDescriptor {
    pub provider_id: String,
    pub dimension: usize,
    pub deterministic: bool,
}

/// Source of raw text embeddings. Implementations must tolerate concurrent
/// calls.
pub trait EmbeddingProvider: Send + Sync {
    fn descriptor(&self) -> &EmbeddingProviderDescriptor;

    /// Unnormalized vector for nonblank `text`.
    fn raw_embedding(&self, text: &str) -> Result<Vec<f64>, EmbeddingError>;
}

/// Embeds `text`, returning a unit vector of the provider's dimension.
pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<Embedding, EmbeddingError> {
    let dimension = provider.descriptor().dimension;
    if text.trim().is_empty() {
        return Ok(Embedding::zero(dimension));
    }
    let raw = provider.raw_embedding(text)?;
    check_dims(dimension, raw.len())?;
    Embedding::normalized(raw)
}

/// Embeds every text; output order matches input order.
pub fn embed_all(
    texts: &[String],
    provider: &dyn EmbeddingProvider,
    exec: Execution,
) -> Result<Vec<Embedding>, EmbeddingError> {
    exec.try_map(texts, |t| embed(t, provider))
}

/// Cosine similarity of two embeddings, clamped to `[-1, 1]`; 0 when either
/// side is zero.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, EmbeddingError> {
    cosine_raw(&u.0, &v.0)
}

/// [`cosine`] over arbitrary (not necessarily normalized) vectors.
pub fn cosine_raw(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    check_dims(u.len(), v.len())?;
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_dims(expected: usize, actual: usize) -> Result<(), EmbeddingError> {
    if expected == actual {
        Ok(())
    } else {
        Err(EmbeddingError::DimensionMismatch { expected, actual })
    }
}
