//! Query path: anchor events by cosine similarity, seeded personalization,
//! PageRank over the rule graph, and re-ranking of the top rules' events.

pub mod personalization;
pub mod ppr;

use serde::Serialize;
use thiserror::Error;

pub use personalization::{personalization_vector, PersonalizationVector, SeedEntry};
pub use ppr::{run_ppr, PprResult};

use crate::config::PipelineConfig;
use crate::embedding::{
    embed_batch, render_event_text, top_k_by_similarity, EmbeddingCache, EmbeddingError, EmbeddingProvider,
    EmbeddingVector,
};
use crate::index::Index;
use crate::rule_graph::NodeId;
use crate::tkg::EventId;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("the corpus has no events")]
    EmptyCorpus,
    #[error("no rule node contains an anchor event")]
    NoSeed,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("PageRank did not converge in {iterations} iterations (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchor {
    pub event_id: EventId,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSet {
    pub anchors: Vec<Anchor>,
}

impl AnchorSet {
    pub fn event_ids(&self) -> Vec<EventId> {
        self.anchors.iter().map(|a| a.event_id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredEvent {
    pub event_id: EventId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredNode {
    pub node_id: NodeId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalTrace {
    pub gamma: Option<PersonalizationVector>,
    /// Highest PageRank scores, at most 50.
    pub pi: Vec<ScoredNode>,
    pub iterations: usize,
    pub residual: f64,
    pub top_rules: Vec<ScoredNode>,
    pub num_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub events: Vec<ScoredEvent>,
    pub top_rules: Vec<NodeId>,
    pub anchors: AnchorSet,
    /// Set when no seed existed and the anchors were returned unchanged.
    pub fallback: bool,
    pub trace: RetrievalTrace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub k1: usize,
    /// `usize::MAX` keeps every rule node.
    pub k2: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub theta: f64,
    pub beta: f64,
    pub tau: Option<f64>,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams::from(&PipelineConfig::default())
    }
}

impl From<&PipelineConfig> for RetrievalParams {
    fn from(c: &PipelineConfig) -> Self {
        RetrievalParams {
            k1: c.k1,
            k2: c.k2,
            alpha: c.alpha,
            epsilon: c.epsilon,
            max_iterations: c.max_iterations,
            theta: c.theta,
            beta: c.beta,
            tau: c.tau,
        }
    }
}

pub fn select_anchors(query: &EmbeddingVector, vectors: &[EmbeddingVector], k1: usize) -> Result<AnchorSet, RetrievalError> {
    if vectors.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    if k1 == 0 {
        return Err(RetrievalError::InvalidParameter("k1 must be at least 1".into()));
    }
    let top = top_k_by_similarity(query, 0..vectors.len() as u32, vectors, k1)?;
    Ok(AnchorSet {
        anchors: top
            .into_iter()
            .enumerate()
            .map(|(i, (id, score))| Anchor {
                event_id: EventId(id),
                score,
                rank: i + 1,
            })
            .collect(),
    })
}

/// Rule nodes whose support contains at least one anchor, ascending.
pub fn seed_rules(anchors: &AnchorSet, index: &Index) -> Result<Vec<NodeId>, RetrievalError> {
    let mut seeds: Vec<NodeId> = anchors
        .anchors
        .iter()
        .flat_map(|a| index.nodes_of(a.event_id).iter().copied())
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.is_empty() {
        return Err(RetrievalError::NoSeed);
    }
    Ok(seeds)
}

fn top_nodes(scores: &[f64], k: usize) -> Vec<ScoredNode> {
    let mut order: Vec<ScoredNode> = scores
        .iter()
        .enumerate()
        .map(|(i, &score)| ScoredNode {
            node_id: NodeId(i as u32),
            score,
        })
        .collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node_id.cmp(&b.node_id)));
    order.truncate(k);
    order
}

/// Full retrieval for a precomputed query vector. `vectors` holds one
/// embedding per corpus event, indexed by event id.
pub fn retrieve(
    index: &Index,
    vectors: &[EmbeddingVector],
    query: &EmbeddingVector,
    params: &RetrievalParams,
) -> Result<RetrievalResult, RetrievalError> {
    if params.k2 == 0 {
        return Err(RetrievalError::InvalidParameter("k2 must be at least 1".into()));
    }
    let anchors = select_anchors(query, vectors, params.k1)?;
    let seeds = match seed_rules(&anchors, index) {
        Ok(s) => s,
        Err(RetrievalError::NoSeed) => {
            log::warn!("no seed rule for query; returning raw anchors");
            return Ok(RetrievalResult {
                events: anchors
                    .anchors
                    .iter()
                    .map(|a| ScoredEvent {
                        event_id: a.event_id,
                        score: a.score,
                    })
                    .collect(),
                top_rules: Vec::new(),
                fallback: true,
                trace: RetrievalTrace {
                    gamma: None,
                    pi: Vec::new(),
                    iterations: 0,
                    residual: 0.0,
                    top_rules: Vec::new(),
                    num_candidates: anchors.anchors.len(),
                },
                anchors,
            });
        }
        Err(e) => return Err(e),
    };
    let nodes = &index.graph.nodes;
    let gamma = personalization_vector(&anchors, &seeds, nodes, params.theta, params.beta, params.tau)?;
    let ppr = run_ppr(
        &index.graph.transition,
        &gamma.to_dense(nodes.len()),
        params.alpha,
        params.epsilon,
        params.max_iterations,
    )?;
    let top_rules = top_nodes(&ppr.scores, params.k2);
    let mut candidates: Vec<u32> = top_rules
        .iter()
        .flat_map(|n| nodes[n.node_id.index()].support.iter().map(|e| e.0))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    let num_candidates = candidates.len();
    let events = top_k_by_similarity(query, candidates, vectors, params.k1)?
        .into_iter()
        .map(|(id, score)| ScoredEvent {
            event_id: EventId(id),
            score,
        })
        .collect();
    Ok(RetrievalResult {
        events,
        top_rules: top_rules.iter().map(|n| n.node_id).collect(),
        anchors,
        fallback: false,
        trace: RetrievalTrace {
            gamma: Some(gamma),
            pi: top_nodes(&ppr.scores, 50),
            iterations: ppr.iterations,
            residual: ppr.residual,
            top_rules,
            num_candidates,
        },
    })
}

/// An index paired with its embedded corpus, answering text queries.
pub struct Retriever<'a> {
    pub index: &'a Index,
    provider: &'a dyn EmbeddingProvider,
    cache: Option<&'a EmbeddingCache>,
    vectors: Vec<EmbeddingVector>,
}

impl<'a> Retriever<'a> {
    pub fn new(
        index: &'a Index,
        provider: &'a dyn EmbeddingProvider,
        cache: Option<&'a EmbeddingCache>,
    ) -> Result<Self, RetrievalError> {
        let texts: Vec<String> = index.kg.events().iter().map(|e| render_event_text(&index.kg, e)).collect();
        let vectors = embed_batch(provider, cache, &texts)?;
        Ok(Retriever {
            index,
            provider,
            cache,
            vectors,
        })
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    pub fn embed_query(&self, query: &str) -> Result<EmbeddingVector, RetrievalError> {
        let mut v = embed_batch(self.provider, self.cache, &[query.to_string()])?;
        Ok(v.remove(0))
    }

    pub fn retrieve(&self, query: &str, params: &RetrievalParams) -> Result<RetrievalResult, RetrievalError> {
        let q = self.embed_query(query)?;
        retrieve(self.index, &self.vectors, &q, params)
    }
}
