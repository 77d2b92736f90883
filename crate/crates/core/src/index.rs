//! The persisted retrieval index: corpus, labels, rule nodes, selected edges
//! and MDL costs in one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::{label_entities, LabelAssignment, LabelDocument, LabelError, TypeId};
use crate::rule_graph::{
    build_rule_graph, edge_weight, generate_rule_nodes, hamming_distance, MdlBreakdown, NodeId, RuleGraph,
    RuleGraphError, SelectedEdge, SpanConfig,
};
use crate::tkg::{kg_stats, DatasetStats, EventId, TemporalKg, Timestamp, TkgBuilder};

pub const FORMAT: &str = "tkrag-index/1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    RuleGraph(#[from] RuleGraphError),
    #[error("cannot access index {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed index: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> IndexError {
    IndexError::Malformed(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub min_support_fraction: f64,
    pub max_subset_len: usize,
    pub k_type: usize,
    pub pair_cap: u64,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            min_support_fraction: 0.01,
            max_subset_len: 3,
            k_type: 3,
            pair_cap: 1_000_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub kg: TemporalKg,
    pub labels: LabelAssignment,
    pub graph: RuleGraph,
    pub params: BuildParams,
    /// Rule nodes containing each event, indexed by event id.
    pub event_nodes: Vec<Vec<NodeId>>,
}

fn event_node_map(kg: &TemporalKg, graph: &RuleGraph) -> Vec<Vec<NodeId>> {
    let mut map = vec![Vec::new(); kg.len()];
    for n in &graph.nodes {
        for e in &n.support {
            map[e.index()].push(n.node_id);
        }
    }
    map
}

pub fn build_index(kg: TemporalKg, params: BuildParams) -> Result<Index, IndexError> {
    let labels = label_entities(&kg, params.min_support_fraction, params.max_subset_len, params.k_type)?;
    let span_cfg = SpanConfig {
        pair_cap: params.pair_cap,
        seed: params.seed,
    };
    let graph = build_rule_graph(&kg, &labels, &span_cfg)?.graph;
    let event_nodes = event_node_map(&kg, &graph);
    Ok(Index {
        kg,
        labels,
        graph,
        params,
        event_nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: u32,
    pub subject_type: u32,
    pub relation: String,
    pub object_type: u32,
    pub support: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: u32,
    pub v: u32,
    pub num_spans: u64,
    pub mean_span: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdlRecord {
    pub model_cost: f64,
    pub coverage_cost: f64,
    pub temporal_cost: f64,
    pub unexplained_cost: f64,
    pub total: f64,
    pub num_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexDocument {
    pub format: String,
    pub params: BuildParams,
    pub stats: DatasetStats,
    /// `[subject, relation, object, date]` in event-id order.
    pub events: Vec<[String; 4]>,
    pub labels: LabelDocument,
    pub rule_nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub mdl: MdlRecord,
}

impl Index {
    pub fn num_nodes(&self) -> usize {
        self.graph.nodes.len()
    }

    pub fn to_document(&self) -> IndexDocument {
        let kg = &self.kg;
        let m = &self.graph.mdl;
        IndexDocument {
            format: FORMAT.into(),
            params: self.params,
            stats: kg_stats(kg),
            events: kg
                .events()
                .iter()
                .map(|e| {
                    [
                        kg.entity_name(e.subject).to_string(),
                        kg.relation_name(e.relation).to_string(),
                        kg.entity_name(e.object).to_string(),
                        e.time.to_string(),
                    ]
                })
                .collect(),
            labels: self.labels.to_document(kg),
            rule_nodes: self
                .graph
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    node_id: n.node_id.0,
                    subject_type: n.key.subject_type.0,
                    relation: kg.relation_name(n.key.relation).to_string(),
                    object_type: n.key.object_type.0,
                    support: n.support.iter().map(|e| e.0).collect(),
                })
                .collect(),
            edges: self
                .graph
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    u: e.u.0,
                    v: e.v.0,
                    num_spans: e.num_spans,
                    mean_span: e.mean_span,
                    weight: e.weight,
                })
                .collect(),
            mdl: MdlRecord {
                model_cost: m.model_cost,
                coverage_cost: m.coverage_cost,
                temporal_cost: m.temporal_cost,
                unexplained_cost: m.unexplained_cost,
                total: m.total(),
                num_candidates: self.graph.num_candidates,
            },
        }
    }

    /// Rebuilds an index from its document. Rule nodes are re-derived from the
    /// labels and must match the stored ones; edges must join Hamming-1 nodes
    /// and carry finite non-negative weights.
    pub fn from_document(doc: &IndexDocument) -> Result<Self, IndexError> {
        if doc.format != FORMAT {
            return Err(malformed(format!("unsupported format {:?}", doc.format)));
        }
        let mut builder = TkgBuilder::new();
        for (i, [s, r, o, d]) in doc.events.iter().enumerate() {
            let t: Timestamp = d.parse().map_err(|e| malformed(format!("event {i}: {e}")))?;
            if builder.push(s, r, o, t).is_none() {
                return Err(malformed(format!("event {i} is a duplicate")));
            }
        }
        let kg = builder.build();
        let labels = LabelAssignment::from_document(&doc.labels, &kg).map_err(malformed)?;
        let nodes = generate_rule_nodes(&kg, &labels);
        if nodes.len() != doc.rule_nodes.len() {
            return Err(malformed(format!(
                "labels imply {} rule nodes, file lists {}",
                nodes.len(),
                doc.rule_nodes.len()
            )));
        }
        for (n, rec) in nodes.iter().zip(&doc.rule_nodes) {
            let same = n.node_id.0 == rec.node_id
                && n.key.subject_type == TypeId(rec.subject_type)
                && kg.relation_name(n.key.relation) == rec.relation
                && n.key.object_type == TypeId(rec.object_type)
                && n.support.iter().map(|e| e.0).eq(rec.support.iter().copied());
            if !same {
                return Err(malformed(format!("rule node {} does not match the labels", rec.node_id)));
            }
        }
        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            let (u, v) = (e.u as usize, e.v as usize);
            if u >= nodes.len() || v >= nodes.len() || u >= v {
                return Err(malformed(format!("edge ({}, {}) is out of range or unordered", e.u, e.v)));
            }
            if hamming_distance(&nodes[u].key, &nodes[v].key) != 1 {
                return Err(malformed(format!("edge ({}, {}) joins non-adjacent rules", e.u, e.v)));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0 && e.mean_span.is_finite() && e.mean_span >= 0.0) {
                return Err(malformed(format!("edge ({}, {}) has an invalid weight", e.u, e.v)));
            }
            edges.push(SelectedEdge {
                u: NodeId(e.u),
                v: NodeId(e.v),
                num_spans: e.num_spans,
                mean_span: e.mean_span,
                weight: e.weight,
            });
        }
        let mdl = MdlBreakdown {
            model_cost: doc.mdl.model_cost,
            coverage_cost: doc.mdl.coverage_cost,
            temporal_cost: doc.mdl.temporal_cost,
            unexplained_cost: doc.mdl.unexplained_cost,
        };
        let graph = RuleGraph::from_parts(nodes, edges, mdl, doc.mdl.num_candidates);
        let event_nodes = event_node_map(&kg, &graph);
        Ok(Index {
            kg,
            labels,
            graph,
            params: doc.params,
            event_nodes,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("index serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, IndexError> {
        let doc: IndexDocument = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn nodes_of(&self, event: EventId) -> &[NodeId] {
        &self.event_nodes[event.index()]
    }

    /// Edge weight recomputed from the persisted span statistics.
    pub fn recomputed_weight(edge: &EdgeRecord) -> f64 {
        edge_weight(edge.num_spans, edge.mean_span)
    }
}
