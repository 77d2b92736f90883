use std::cmp::Ordering;

use super::mdl::{MdlBreakdown, MdlContext};
use super::nodes::RuleNode;
use super::spans::CandidateEdge;
use super::RuleGraphError;

/// One accepted edge and the description length right after accepting it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub candidate: usize,
    pub delta: f64,
    pub total_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Candidate indices in acceptance order.
    pub selected: Vec<usize>,
    pub log: Vec<Acceptance>,
    pub initial_total: f64,
    pub passes: usize,
    pub breakdown: MdlBreakdown,
}

/// Most spans first, then tighter mean span, then node ids.
pub fn examination_order(candidates: &[CandidateEdge]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&candidates[a], &candidates[b]);
        y.num_spans
            .cmp(&x.num_spans)
            .then(x.mean_span.partial_cmp(&y.mean_span).unwrap_or(Ordering::Equal))
            .then((x.u, x.v).cmp(&(y.u, y.v)))
    });
    order
}

fn d_log_d(d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        d as f64 * (d as f64).log2()
    }
}

/// Model-side state kept up to date as edges are accepted. The edge code sum
/// `Σ_edges -log2 p_V(u) - log2 p_V(v)` equals `2E·log2(2E) - Σ_x deg(x)·log2 deg(x)`.
struct ModelState {
    in_model: Vec<bool>,
    degree: Vec<u64>,
    num_edges: u64,
    sum_d_log_d: f64,
}

impl ModelState {
    fn new(n: usize) -> Self {
        ModelState {
            in_model: vec![false; n],
            degree: vec![0; n],
            num_edges: 0,
            sum_d_log_d: 0.0,
        }
    }

    fn edge_code(num_edges: u64, sum_d_log_d: f64) -> f64 {
        if num_edges == 0 {
            0.0
        } else {
            let two_e = 2.0 * num_edges as f64;
            two_e * two_e.log2() - sum_d_log_d
        }
    }

    fn sum_after(&self, u: usize, v: usize) -> f64 {
        let (du, dv) = (self.degree[u], self.degree[v]);
        self.sum_d_log_d - d_log_d(du) - d_log_d(dv) + d_log_d(du + 1) + d_log_d(dv + 1)
    }

    fn model_delta(&self, ctx: &MdlContext, nodes: &[RuleNode], u: usize, v: usize) -> f64 {
        let mut delta = 0.0;
        for x in [u, v] {
            if !self.in_model[x] {
                delta += ctx.node_bits(&nodes[x].key);
            }
        }
        delta + Self::edge_code(self.num_edges + 1, self.sum_after(u, v))
            - Self::edge_code(self.num_edges, self.sum_d_log_d)
    }

    fn accept(&mut self, u: usize, v: usize) {
        self.sum_d_log_d = self.sum_after(u, v);
        self.degree[u] += 1;
        self.degree[v] += 1;
        self.num_edges += 1;
        self.in_model[u] = true;
        self.in_model[v] = true;
    }
}

/// Greedy MDL edge selection. Candidates are scanned in
/// [`examination_order`]; an edge is kept iff adding it (with both endpoints)
/// strictly lowers the total description length. Passes repeat until one
/// accepts nothing.
pub fn greedy_select_edges(
    nodes: &[RuleNode],
    candidates: &[CandidateEdge],
    ctx: &MdlContext,
) -> Result<Selection, RuleGraphError> {
    let mut state = ModelState::new(nodes.len());
    let mut gains = Vec::with_capacity(candidates.len());
    for e in candidates {
        let (cov, time) = ctx.explained(nodes, e)?;
        gains.push(cov + time - ctx.unexplained(nodes, e));
    }
    let initial_total = ctx.constant_bits() + candidates.iter().map(|e| ctx.unexplained(nodes, e)).sum::<f64>();

    let mut total = initial_total;
    let mut pending = examination_order(candidates);
    let mut selected = Vec::new();
    let mut log = Vec::new();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut rejected = Vec::with_capacity(pending.len());
        for &i in &pending {
            let e = &candidates[i];
            let (u, v) = (e.u.index(), e.v.index());
            let delta = state.model_delta(ctx, nodes, u, v) + gains[i];
            if delta < 0.0 {
                state.accept(u, v);
                total += delta;
                selected.push(i);
                log.push(Acceptance {
                    candidate: i,
                    delta,
                    total_after: total,
                });
            } else {
                rejected.push(i);
            }
        }
        let progressed = rejected.len() < pending.len();
        pending = rejected;
        if !progressed || pending.is_empty() {
            break;
        }
    }
    log::debug!(
        "mdl selection: {} of {} candidates in {} passes, {:.3} -> {:.3}",
        selected.len(),
        candidates.len(),
        passes,
        initial_total,
        total
    );
    let breakdown = ctx.breakdown(nodes, candidates, &selected)?;
    Ok(Selection {
        selected,
        log,
        initial_total,
        passes,
        breakdown,
    })
}

/// Change in total description length from adding candidate `edge` to the
/// model `selected`, computed from two full evaluations.
pub fn delta_from_scratch(
    nodes: &[RuleNode],
    candidates: &[CandidateEdge],
    ctx: &MdlContext,
    selected: &[usize],
    edge: usize,
) -> Result<f64, RuleGraphError> {
    let before = ctx.breakdown(nodes, candidates, selected)?.total();
    let mut with = selected.to_vec();
    with.push(edge);
    Ok(ctx.breakdown(nodes, candidates, &with)?.total() - before)
}
