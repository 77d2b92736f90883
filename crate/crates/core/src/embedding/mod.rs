//! Text embeddings: providers, an on-disk cache, cosine similarity and exact top-k.

pub mod cache;
pub mod hashing;
pub mod http;

use std::cmp::Ordering;

use thiserror::Error;

pub use cache::{embed_batch, EmbeddingCache};
pub use hashing::HashingProvider;
pub use http::HttpEmbeddingProvider;

use crate::tkg::{Event, TemporalKg};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("corrupt cache entry {0}")]
    CacheCorruption(String),
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f32) -> Self {
        EmbeddingVector::new(self.values.iter().map(|x| x * c).collect())
    }
}

/// Maps texts to vectors. Implementations must be deterministic for a fixed
/// configuration, since cached vectors are keyed by `name()` and text only.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

/// `"{subject} {relation} {object} @ {YYYY-MM-DD}"`.
pub fn render_event_text(kg: &TemporalKg, event: &Event) -> String {
    format!(
        "{} {} {} @ {}",
        kg.entity_name(event.subject),
        kg.relation_name(event.relation),
        kg.entity_name(event.object),
        event.time
    )
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(&x, &y)| x as f64 * y as f64).sum();
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn by_score_then_id(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Highest cosine scores first, ties broken by ascending id. `vectors` is
/// indexed by id.
pub fn top_k_by_similarity(
    query: &EmbeddingVector,
    candidate_ids: impl IntoIterator<Item = u32>,
    vectors: &[EmbeddingVector],
    k: usize,
) -> Result<Vec<(u32, f64)>, EmbeddingError> {
    let mut scored = candidate_ids
        .into_iter()
        .map(|id| Ok((id, cosine_similarity(query, &vectors[id as usize])?)))
        .collect::<Result<Vec<_>, EmbeddingError>>()?;
    if k == 0 {
        return Ok(Vec::new());
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, by_score_then_id);
        scored.truncate(k);
    }
    scored.sort_by(by_score_then_id);
    Ok(scored)
}
