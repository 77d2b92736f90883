//! Rule graph construction: rule nodes from labeled events, Hamming-1
//! candidate edges with temporal span sets, greedy MDL edge selection and the
//! normalized transition matrix used for PageRank.

pub mod mdl;
pub mod nodes;
pub mod select;
pub mod spans;
pub mod transition;

use thiserror::Error;

pub use mdl::{coverage_cost, temporal_cost, MdlBreakdown, MdlContext};
pub use nodes::{generate_rule_nodes, hamming_distance, NodeId, RuleKey, RuleNode};
pub use select::{greedy_select_edges, Selection};
pub use spans::{compute_span_set, generate_candidate_edges, CandidateEdge, SpanConfig};
pub use transition::Transition;

use crate::labeling::LabelAssignment;
use crate::tkg::TemporalKg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleGraphError {
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("degenerate spans: {0}")]
    DegenerateSpans(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub num_spans: u64,
    pub mean_span: f64,
    pub weight: f64,
}

/// `|T_uv| / (1 + mean span)`.
pub fn edge_weight(num_spans: u64, mean_span: f64) -> f64 {
    num_spans as f64 / (1.0 + mean_span)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleGraph {
    pub nodes: Vec<RuleNode>,
    pub edges: Vec<SelectedEdge>,
    pub transition: Transition,
    pub mdl: MdlBreakdown,
    pub num_candidates: usize,
}

impl RuleGraph {
    pub fn from_parts(nodes: Vec<RuleNode>, mut edges: Vec<SelectedEdge>, mdl: MdlBreakdown, num_candidates: usize) -> Self {
        edges.sort_by_key(|e| (e.u, e.v));
        let transition = build_transition_matrix(nodes.len(), &edges);
        RuleGraph {
            nodes,
            edges,
            transition,
            mdl,
            num_candidates,
        }
    }

    pub fn total_description_length(&self) -> f64 {
        self.mdl.total()
    }
}

pub fn build_transition_matrix(num_nodes: usize, edges: &[SelectedEdge]) -> Transition {
    let weighted: Vec<(usize, usize, f64)> = edges.iter().map(|e| (e.u.index(), e.v.index(), e.weight)).collect();
    Transition::from_weighted_edges(num_nodes, &weighted)
}

/// Everything produced while building a rule graph, for inspection and tests.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub graph: RuleGraph,
    pub candidates: Vec<CandidateEdge>,
    pub context: MdlContext,
    pub selection: Selection,
}

pub fn build_rule_graph(kg: &TemporalKg, labels: &LabelAssignment, cfg: &SpanConfig) -> Result<BuildOutput, RuleGraphError> {
    let nodes = generate_rule_nodes(kg, labels);
    let candidates = generate_candidate_edges(&nodes, kg, cfg);
    let context = MdlContext::from_corpus(kg, labels, &nodes, &candidates);
    let selection = greedy_select_edges(&nodes, &candidates, &context)?;
    let edges = selection
        .selected
        .iter()
        .map(|&i| {
            let c = &candidates[i];
            SelectedEdge {
                u: c.u,
                v: c.v,
                num_spans: c.num_spans,
                mean_span: c.mean_span,
                weight: edge_weight(c.num_spans, c.mean_span),
            }
        })
        .collect();
    log::info!(
        "rule graph: {} nodes, {} candidate edges, {} selected",
        nodes.len(),
        candidates.len(),
        selection.selected.len()
    );
    let graph = RuleGraph::from_parts(nodes, edges, selection.breakdown, candidates.len());
    Ok(BuildOutput {
        graph,
        candidates,
        context,
        selection,
    })
}
