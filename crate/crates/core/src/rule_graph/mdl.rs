//! Description-length terms for rule-graph edge selection.
//!
//! Model and coverage terms are in bits, the temporal term in nats; totals add
//! them as raw magnitudes. Evidence of a candidate edge that is not in the
//! model is charged an "unexplained" cost: its related pairs are coded with
//! the corpus-wide conversion rate over all candidate pair spaces, and each
//! span is coded uniformly over the corpus time range.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::nodes::{RuleKey, RuleNode};
use super::spans::CandidateEdge;
use super::RuleGraphError;
use crate::labeling::LabelAssignment;
use crate::tkg::TemporalKg;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MdlBreakdown {
    pub model_cost: f64,
    pub coverage_cost: f64,
    pub temporal_cost: f64,
    /// Cost of candidate evidence left outside the model.
    pub unexplained_cost: f64,
}

impl MdlBreakdown {
    pub fn total(&self) -> f64 {
        self.model_cost + self.coverage_cost + self.temporal_cost + self.unexplained_cost
    }
}

/// `log2 C(n, k)`.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    let ln = if k <= 4096 {
        (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum::<f64>()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    };
    ln / std::f64::consts::LN_2
}

/// Bits to say which `num_spans` of the `|supp(u)|·|supp(v)|` pairs an edge explains.
pub fn coverage_cost(support_u: usize, support_v: usize, num_spans: u64) -> Result<f64, RuleGraphError> {
    let n = support_u as u64 * support_v as u64;
    if num_spans > n {
        return Err(RuleGraphError::InvariantViolation(format!(
            "{num_spans} spans exceed the {n} available event pairs"
        )));
    }
    Ok(log2_binomial(n, num_spans))
}

/// Exponential negative log-likelihood (nats) of a span multiset at its MLE rate.
pub fn temporal_cost(spans: &[f64]) -> Result<f64, RuleGraphError> {
    if spans.is_empty() {
        return Err(RuleGraphError::DegenerateSpans("empty span set".into()));
    }
    let mean = spans.iter().sum::<f64>() / spans.len() as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(RuleGraphError::DegenerateSpans("mean span is zero".into()));
    }
    Ok(temporal_cost_from_stats(spans.len() as f64, mean))
}

/// Same as [`temporal_cost`] given only the span count and mean.
pub fn temporal_cost_from_stats(count: f64, mean: f64) -> f64 {
    count + count * mean.ln()
}

/// Cost of a candidate's evidence when no edge explains it: Bernoulli code
/// at `base_rate` for which of the `pair_space` pairs are related (bits),
/// plus a uniform code over `0..=time_range_days` per span (nats).
pub fn unexplained_cost(pair_space: u64, num_spans: u64, base_rate: f64, time_range_days: u32) -> f64 {
    if num_spans == 0 {
        return 0.0;
    }
    let k = num_spans as f64;
    let rest = pair_space.saturating_sub(num_spans) as f64;
    let mut bits = -k * base_rate.log2();
    if rest > 0.0 {
        bits -= rest * (-base_rate).ln_1p() / std::f64::consts::LN_2;
    }
    bits + k * (time_range_days as f64 + 1.0).ln()
}

/// Fraction of candidate pair spaces that are related pairs.
pub fn base_conversion_rate(nodes: &[RuleNode], candidates: &[CandidateEdge]) -> f64 {
    let (mut related, mut space) = (0.0, 0.0);
    for e in candidates {
        related += e.num_spans as f64;
        space += (nodes[e.u.index()].support.len() * nodes[e.v.index()].support.len()) as f64;
    }
    if space > 0.0 {
        related / space
    } else {
        0.0
    }
}

/// Corpus-level quantities the model cost depends on.
#[derive(Debug, Clone)]
pub struct MdlContext {
    pub num_types: usize,
    pub num_relations: usize,
    pub num_candidates: usize,
    pub time_range_days: u32,
    /// Related-pair rate shared by every unexplained candidate.
    pub base_rate: f64,
    /// Empirical category/relation probabilities, indexed by id.
    pub p_subject: Vec<f64>,
    pub p_relation: Vec<f64>,
    pub p_object: Vec<f64>,
}

impl MdlContext {
    /// Estimates `p_s`, `p_r`, `p_o` from the events. An event whose subject
    /// carries `m` labels adds `1/m` to each of them (likewise for objects).
    pub fn from_corpus(kg: &TemporalKg, labels: &LabelAssignment, nodes: &[RuleNode], candidates: &[CandidateEdge]) -> Self {
        let a = labels.num_types();
        let mut ps = vec![0.0; a];
        let mut po = vec![0.0; a];
        let mut pr = vec![0.0; kg.relations().len()];
        for e in kg.events() {
            let ls = labels.labels_of(e.subject);
            let lo = labels.labels_of(e.object);
            for t in ls {
                ps[t.0 as usize] += 1.0 / ls.len() as f64;
            }
            for t in lo {
                po[t.0 as usize] += 1.0 / lo.len() as f64;
            }
            pr[e.relation.0 as usize] += 1.0;
        }
        let n = kg.len().max(1) as f64;
        for p in ps.iter_mut().chain(po.iter_mut()).chain(pr.iter_mut()) {
            *p /= n;
        }
        MdlContext {
            num_types: a,
            num_relations: kg.relations().len(),
            num_candidates: candidates.len(),
            time_range_days: kg.time_range_days(),
            base_rate: base_conversion_rate(nodes, candidates),
            p_subject: ps,
            p_relation: pr,
            p_object: po,
        }
    }

    /// `log2(A²|R|) + log2(2|W|)`; a zero count contributes nothing.
    pub fn constant_bits(&self) -> f64 {
        let a2r = (self.num_types as f64).powi(2) * self.num_relations as f64;
        let w2 = 2.0 * self.num_candidates as f64;
        let lg = |x: f64| if x > 0.0 { x.log2() } else { 0.0 };
        lg(a2r) + lg(w2)
    }

    pub fn node_bits(&self, key: &RuleKey) -> f64 {
        -self.p_subject[key.subject_type.0 as usize].log2()
            - self.p_relation[key.relation.0 as usize].log2()
            - self.p_object[key.object_type.0 as usize].log2()
    }

    pub fn unexplained(&self, nodes: &[RuleNode], edge: &CandidateEdge) -> f64 {
        let pair_space = nodes[edge.u.index()].support.len() as u64 * nodes[edge.v.index()].support.len() as u64;
        unexplained_cost(pair_space, edge.num_spans, self.base_rate, self.time_range_days)
    }

    /// Coverage plus temporal cost of an edge that is in the model.
    pub fn explained(&self, nodes: &[RuleNode], edge: &CandidateEdge) -> Result<(f64, f64), RuleGraphError> {
        let cov = coverage_cost(
            nodes[edge.u.index()].support.len(),
            nodes[edge.v.index()].support.len(),
            edge.num_spans,
        )?;
        Ok((cov, temporal_cost_from_stats(edge.num_spans as f64, edge.mean_span)))
    }

    /// Model cost written out term by term: constants, node codes for the
    /// model's nodes, and `-log2 p_V(u) - log2 p_V(v)` per selected edge with
    /// `p_V(x) = deg(x) / 2|E|`.
    pub fn model_cost(&self, nodes: &[RuleNode], model_nodes: &[usize], edges: &[(usize, usize)]) -> f64 {
        let mut bits = self.constant_bits();
        bits += model_nodes.iter().map(|&i| self.node_bits(&nodes[i].key)).sum::<f64>();
        if !edges.is_empty() {
            let mut degree = vec![0usize; nodes.len()];
            for &(u, v) in edges {
                degree[u] += 1;
                degree[v] += 1;
            }
            let denom = 2.0 * edges.len() as f64;
            for &(u, v) in edges {
                bits -= (degree[u] as f64 / denom).log2() + (degree[v] as f64 / denom).log2();
            }
        }
        bits
    }

    /// Full breakdown for a selected subset of `candidates`, computed from scratch.
    pub fn breakdown(
        &self,
        nodes: &[RuleNode],
        candidates: &[CandidateEdge],
        selected: &[usize],
    ) -> Result<MdlBreakdown, RuleGraphError> {
        let mut in_model = vec![false; nodes.len()];
        let mut chosen = vec![false; candidates.len()];
        let mut edges = Vec::with_capacity(selected.len());
        for &i in selected {
            let e = &candidates[i];
            in_model[e.u.index()] = true;
            in_model[e.v.index()] = true;
            chosen[i] = true;
            edges.push((e.u.index(), e.v.index()));
        }
        let model_nodes: Vec<usize> = (0..nodes.len()).filter(|&i| in_model[i]).collect();
        let mut out = MdlBreakdown {
            model_cost: self.model_cost(nodes, &model_nodes, &edges),
            ..Default::default()
        };
        for (i, e) in candidates.iter().enumerate() {
            if chosen[i] {
                let (cov, time) = self.explained(nodes, e)?;
                out.coverage_cost += cov;
                out.temporal_cost += time;
            } else {
                out.unexplained_cost += self.unexplained(nodes, e);
            }
        }
        Ok(out)
    }
}
