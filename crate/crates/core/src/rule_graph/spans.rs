use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::nodes::{event_hamming, NodeId, RuleKey, RuleNode};
use crate::labeling::TypeId;
use crate::tkg::{EventId, RelationId, TemporalKg};

/// Same-day spans are replaced by this many days before any log is taken.
pub const ZERO_SPAN_FLOOR: f64 = 0.5;
pub const DEFAULT_PAIR_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanConfig {
    /// Maximum number of event pairs enumerated per node pair.
    pub pair_cap: u64,
    pub seed: u64,
}

impl Default for SpanConfig {
    fn default() -> Self {
        SpanConfig {
            pair_cap: DEFAULT_PAIR_CAP,
            seed: 42,
        }
    }
}

/// Spans between similar events of two rule nodes, possibly from a subsample
/// of the support product.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanSet {
    /// Day differences actually observed, multiset semantics.
    pub spans: Vec<u32>,
    /// Full-product size divided by enumerated-product size (1.0 when exact).
    pub scale: f64,
    /// `|supp(u)| * |supp(v)|` before any subsampling.
    pub pair_space: u64,
}

impl SpanSet {
    /// Estimated span count over the full product.
    pub fn count(&self) -> u64 {
        ((self.spans.len() as f64 * self.scale).round() as u64).min(self.pair_space)
    }

    /// Mean span with zero spans floored.
    pub fn floored_mean(&self) -> Option<f64> {
        if self.spans.is_empty() {
            return None;
        }
        let sum: f64 = self.spans.iter().map(|&d| floor_span(d)).sum();
        Some(sum / self.spans.len() as f64)
    }
}

pub fn floor_span(d: u32) -> f64 {
    if d == 0 {
        ZERO_SPAN_FLOOR
    } else {
        d as f64
    }
}

/// A node pair at rule Hamming distance 1 with a non-empty span multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub spans: SpanSet,
    pub num_spans: u64,
    /// Mean of the floored spans.
    pub mean_span: f64,
}

impl CandidateEdge {
    /// Maximum-likelihood exponential rate.
    pub fn lambda(&self) -> f64 {
        1.0 / self.mean_span
    }
}

/// Day spans `|t' - t|` for every `f in supp(u)`, `f' in supp(v)` whose
/// `(s, r, o)` differ in at most two positions.
pub fn compute_span_set(u: &RuleNode, v: &RuleNode, kg: &TemporalKg, cfg: &SpanConfig) -> SpanSet {
    let pair_space = u.support.len() as u64 * v.support.len() as u64;
    let (su, sv) = if pair_space > cfg.pair_cap {
        subsample_supports(u, v, cfg)
    } else {
        (u.support.clone(), v.support.clone())
    };
    let enumerated = su.len() as u64 * sv.len() as u64;
    let mut spans = Vec::new();
    for &a in &su {
        let fa = kg.event(a);
        for &b in &sv {
            let fb = kg.event(b);
            if event_hamming(fa, fb) <= 2 {
                spans.push(fa.time.span(fb.time));
            }
        }
    }
    SpanSet {
        spans,
        scale: pair_space as f64 / enumerated.max(1) as f64,
        pair_space,
    }
}

fn subsample_supports(u: &RuleNode, v: &RuleNode, cfg: &SpanConfig) -> (Vec<EventId>, Vec<EventId>) {
    let (nu, nv) = (u.support.len() as f64, v.support.len() as f64);
    let shrink = (cfg.pair_cap as f64 / (nu * nv)).sqrt();
    let mut ku = ((nu * shrink).floor() as usize).clamp(1, u.support.len());
    let mut kv = ((cfg.pair_cap as usize) / ku).clamp(1, v.support.len());
    // a tiny side may leave room for more of the other one
    if kv == v.support.len() {
        ku = ((cfg.pair_cap as usize) / kv).clamp(1, u.support.len());
    } else if ku == u.support.len() {
        kv = ((cfg.pair_cap as usize) / ku).clamp(1, v.support.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((u.node_id.0 as u64) << 32 | v.node_id.0 as u64));
    let mut pick = |support: &[EventId], k: usize| {
        let mut idx = sample(&mut rng, support.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| support[i]).collect::<Vec<_>>()
    };
    let a = pick(&u.support, ku);
    let b = pick(&v.support, kv);
    (a, b)
}

/// Unordered node pairs at rule Hamming distance exactly 1.
pub fn hamming_one_pairs(nodes: &[RuleNode]) -> Vec<(NodeId, NodeId)> {
    type Wild = (Option<TypeId>, Option<RelationId>, Option<TypeId>);
    let mut buckets: HashMap<Wild, Vec<NodeId>> = HashMap::new();
    let wildcards = |k: &RuleKey| -> [Wild; 3] {
        [
            (None, Some(k.relation), Some(k.object_type)),
            (Some(k.subject_type), None, Some(k.object_type)),
            (Some(k.subject_type), Some(k.relation), None),
        ]
    };
    for n in nodes {
        for w in wildcards(&n.key) {
            buckets.entry(w).or_default().push(n.node_id);
        }
    }
    // keys are unique, so each differing pair shares exactly one bucket
    let mut pairs: Vec<(NodeId, NodeId)> = buckets
        .into_values()
        .flat_map(|members| {
            let mut out = Vec::new();
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    let (a, b) = (members[i], members[j]);
                    out.push((a.min(b), a.max(b)));
                }
            }
            out
        })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Hamming-1 pairs with their span sets; pairs without any span are dropped.
pub fn generate_candidate_edges(nodes: &[RuleNode], kg: &TemporalKg, cfg: &SpanConfig) -> Vec<CandidateEdge> {
    hamming_one_pairs(nodes)
        .into_par_iter()
        .filter_map(|(a, b)| {
            let spans = compute_span_set(&nodes[a.index()], &nodes[b.index()], kg, cfg);
            let mean_span = spans.floored_mean()?;
            Some(CandidateEdge {
                u: a,
                v: b,
                num_spans: spans.count(),
                mean_span,
                spans,
            })
        })
        .collect()
}
