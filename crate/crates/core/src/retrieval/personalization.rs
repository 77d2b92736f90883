use serde::Serialize;

use super::{AnchorSet, RetrievalError};
use crate::rule_graph::{NodeId, RuleNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedEntry {
    pub node_id: NodeId,
    /// Support size.
    pub c: f64,
    pub c_tilde: f64,
    /// Rank-discounted anchor hits.
    pub p: f64,
    pub p_tilde: f64,
    pub s: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonalizationVector {
    /// One entry per seed, ascending node id.
    pub entries: Vec<SeedEntry>,
    pub theta: f64,
    pub beta: f64,
    pub tau: f64,
}

impl PersonalizationVector {
    pub fn seed_set(&self) -> Vec<NodeId> {
        self.entries.iter().map(|e| e.node_id).collect()
    }

    pub fn to_dense(&self, num_nodes: usize) -> Vec<f64> {
        let mut g = vec![0.0; num_nodes];
        for e in &self.entries {
            g[e.node_id.index()] = e.gamma;
        }
        g
    }
}

/// Blends normalized support size with geometrically rank-discounted anchor
/// hits, smooths by `tau` (default `1/|seeds|`) and normalizes over the seeds.
pub fn personalization_vector(
    anchors: &AnchorSet,
    seeds: &[NodeId],
    nodes: &[RuleNode],
    theta: f64,
    beta: f64,
    tau: Option<f64>,
) -> Result<PersonalizationVector, RetrievalError> {
    if seeds.is_empty() {
        return Err(RetrievalError::NoSeed);
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(RetrievalError::InvalidParameter(format!("theta {theta} not in [0, 1]")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(RetrievalError::InvalidParameter(format!("beta {beta} not in (0, 1)")));
    }
    let tau = tau.unwrap_or(1.0 / seeds.len() as f64);
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(RetrievalError::InvalidParameter(format!("tau {tau} must be positive")));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();

    let c: Vec<f64> = seeds.iter().map(|u| nodes[u.index()].support.len() as f64).collect();
    let p: Vec<f64> = seeds
        .iter()
        .map(|u| {
            let support = &nodes[u.index()].support;
            anchors
                .anchors
                .iter()
                .filter(|a| support.binary_search(&a.event_id).is_ok())
                .map(|a| beta.powi(a.rank as i32 - 1))
                .sum()
        })
        .collect();
    let c_sum: f64 = c.iter().sum();
    let p_sum: f64 = p.iter().sum();
    let mut entries: Vec<SeedEntry> = seeds
        .iter()
        .enumerate()
        .map(|(i, &node_id)| {
            let c_tilde = c[i] / c_sum;
            let p_tilde = if p_sum > 0.0 { p[i] / p_sum } else { 0.0 };
            SeedEntry {
                node_id,
                c: c[i],
                c_tilde,
                p: p[i],
                p_tilde,
                s: (1.0 - theta) * c_tilde + theta * p_tilde,
                gamma: 0.0,
            }
        })
        .collect();
    let z: f64 = entries.iter().map(|e| e.s + tau).sum();
    for e in &mut entries {
        e.gamma = (e.s + tau) / z;
    }
    Ok(PersonalizationVector {
        entries,
        theta,
        beta,
        tau,
    })
}
