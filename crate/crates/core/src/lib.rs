//! Binary document classification with graph convolution over per-document
//! graphs of words and linked knowledge-graph entities.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`corpus`] loads (or synthesizes) labeled documents and splits them.
//! 2. [`knowledge_graph`] links entity mentions against an alias dictionary and
//!    answers intra-graph queries (shortest paths, description overlap).
//! 3. [`graph_builder`] turns each document into a four-view vertex graph over
//!    its words and linked entities, combines the views and masks weak edges.
//! 4. [`model`] and [`training`] encode graphs with a two-layer GCN, an
//!    attentive readout and a bidirectional LSTM branch, and train the
//!    classifier with exact hand-written gradients.
//!
//! Data-parallel loops (graph building, per-document gradients, prediction)
//! go through [`exec::Execution`], which uses rayon when the `parallel`
//! feature is enabled and falls back to sequential iteration otherwise.

pub mod corpus;
pub mod embeddings;
pub mod exec;
pub mod graph_builder;
pub mod knowledge_graph;
pub mod model;
mod nested;
pub mod stopwords;
pub mod training;

pub use corpus::{tokenize, Corpus, Document, Split};
pub use embeddings::EmbeddingTable;
pub use exec::Execution;
pub use graph_builder::{build_doc_graph, DocGraph, GraphConfig};
pub use knowledge_graph::{Entity, EntityMention, KnowledgeGraph};
pub use model::{ModelConfig, ModelState};
pub use training::{MetricsReport, TrainConfig};
