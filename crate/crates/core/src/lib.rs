//! Temporal knowledge graph retrieval: event loading, entity typing, an MDL
//! rule graph over typed relations, personalized PageRank retrieval, prompt
//! assembly and Hit@k evaluation.

pub mod config;
pub mod embedding;
pub mod eval;
pub mod generation;
pub mod http;
pub mod index;
pub mod labeling;
pub mod retrieval;
pub mod rule_graph;
pub mod tkg;

pub use config::PipelineConfig;
pub use embedding::{EmbeddingProvider, EmbeddingVector, HashingProvider, HttpEmbeddingProvider};
pub use eval::{EvalReport, Question, RunRecord};
pub use generation::{AnswerList, ChatClient, ChatModel, PromptBundle};
pub use index::{build_index, BuildParams, Index};
pub use labeling::{LabelAssignment, TypeId};
pub use retrieval::{retrieve, RetrievalParams, RetrievalResult, Retriever};
pub use rule_graph::{NodeId, RuleGraph, RuleNode};
pub use tkg::{load_tkg, Event, EventId, TemporalKg, Timestamp};
