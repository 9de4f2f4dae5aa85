//! Per-document four-view graphs over words and linked entities.
//!
//! Views:
//! 1. sliding-window co-occurrence over the occurrence sequence,
//! 2. reciprocal KG shortest-path distance between entity vertices,
//! 3. Jaccard overlap of entity descriptions,
//! 4. clamped cosine similarity of initial vertex features.
//!
//! Each view is scaled into `[0, 1]` by its maximum, the views are mixed with
//! `alphas`, entries not strictly above `gamma` are dropped, and the result
//! gets self-loops plus symmetric degree normalization for the GCN.

mod record;
mod views;

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::embeddings::{EmbeddingError, EmbeddingTable};
use crate::exec::Execution;
use crate::knowledge_graph::{link_entities, EntityMention, KgError, KnowledgeGraph, DEFAULT_MAX_DEPTH};
use crate::stopwords::is_stopword;

pub use record::{
    read_graph_dir, write_graph_dir, GraphManifest, GraphMetadata, GraphRecord, ManifestEntry, GRAPH_FORMAT_VERSION,
    MANIFEST_FILE,
};
pub use views::{
    combine_and_mask, normalize_view, renormalize, view1_cooccurrence, view2_kg_distance, view3_description_sim,
    view4_cosine, ViewMatrix,
};

/// Sliding co-occurrence window size.
pub const DEFAULT_WINDOW: usize = 3;
/// Masking threshold on combined edge weights.
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_ALPHAS: [f64; 4] = [0.25; 4];

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("document {0:?} has no vertices after stopword filtering")]
    EmptyGraph(String),
    #[error("all view weights are zero")]
    AllAlphasZero,
    #[error("view weights must be finite and non-negative, got {0:?}")]
    InvalidAlphas([f64; 4]),
    #[error("window must be at least 2, got {0}")]
    InvalidWindow(usize),
    #[error("gamma must be finite, got {0}")]
    InvalidGamma(f64),
    #[error("mention of unknown entity {0:?}")]
    UnknownEntity(String),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph file {path}: {reason}")]
    Format { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub window: usize,
    pub alphas: [f64; 4],
    pub gamma: f64,
    pub max_depth: usize,
    pub filter_stopwords: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            window: DEFAULT_WINDOW,
            alphas: DEFAULT_ALPHAS,
            gamma: DEFAULT_GAMMA,
            max_depth: DEFAULT_MAX_DEPTH,
            filter_stopwords: true,
        }
    }
}

impl GraphConfig {
    /// All-zero alphas are accepted here: they mean "no views" and produce
    /// an edgeless graph (see [`build_doc_graph`]).
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.window < 2 {
            return Err(GraphError::InvalidWindow(self.window));
        }
        if self.alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(GraphError::InvalidAlphas(self.alphas));
        }
        if !self.gamma.is_finite() {
            return Err(GraphError::InvalidGamma(self.gamma));
        }
        Ok(())
    }

    pub fn without_views(&self, dropped: &[usize]) -> GraphConfig {
        let mut cfg = self.clone();
        for &v in dropped {
            cfg.alphas[v - 1] = 0.0;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Word,
    Entity,
}

/// Graph vertex; its position in [`DocGraph::vertices`] is its row in `x0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub kind: VertexKind,
    /// Token for words, entity id for entities.
    pub key: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<Vertex>,
    pub x0: Array2<f64>,
    /// Vertex indices in reading order; each mention emits its entity right
    /// before the first token of its span.
    pub sequence: Vec<usize>,
}

/// Collects word and entity vertices in order of first appearance in the
/// occurrence sequence. Stopwords (when filtered) get neither a vertex nor a
/// sequence slot; words inside mention spans are kept.
pub fn build_vertices(
    doc: &Document,
    mentions: &[EntityMention],
    kg: &KnowledgeGraph,
    table: &EmbeddingTable,
    filter_stopwords: bool,
) -> Result<VertexSet, GraphError> {
    let starts: HashMap<usize, &str> = mentions.iter().map(|m| (m.start, m.entity_id.as_str())).collect();
    let mut ids: HashMap<Vertex, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut sequence = Vec::new();
    let mut visit = |v: Vertex, vertices: &mut Vec<Vertex>| {
        let next = vertices.len();
        let id = *ids.entry(v.clone()).or_insert(next);
        if id == next {
            vertices.push(v);
        }
        id
    };
    for (pos, token) in doc.tokens.iter().enumerate() {
        if let Some(entity_id) = starts.get(&pos) {
            sequence.push(visit(Vertex { kind: VertexKind::Entity, key: entity_id.to_string() }, &mut vertices));
        }
        if !(filter_stopwords && is_stopword(token)) {
            sequence.push(visit(Vertex { kind: VertexKind::Word, key: token.clone() }, &mut vertices));
        }
    }
    if vertices.is_empty() {
        return Err(GraphError::EmptyGraph(doc.id.clone()));
    }
    let mut x0 = Array2::zeros((vertices.len(), table.dim()));
    for (mut row, v) in x0.rows_mut().into_iter().zip(&vertices) {
        match v.kind {
            VertexKind::Word => row.assign(&table.embed_word(&v.key)),
            VertexKind::Entity => {
                let e = kg.entity(&v.key).ok_or_else(|| GraphError::UnknownEntity(v.key.clone()))?;
                row.assign(&table.embed_entity(e)?);
            }
        }
    }
    Ok(VertexSet { vertices, x0, sequence })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocGraph {
    pub doc_id: String,
    pub label: u8,
    /// Full (truncated) token sequence, input of the sequence encoder.
    pub tokens: Vec<String>,
    pub vertices: Vec<Vertex>,
    pub x0: Array2<f64>,
    /// Normalized views, in order V1..V4.
    pub views: [ViewMatrix; 4],
    pub config: GraphConfig,
    pub combined: Array2<f64>,
    pub a_norm: Array2<f64>,
}

impl DocGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Undirected edges surviving the mask.
    pub fn n_edges(&self) -> usize {
        let n = self.combined.nrows();
        (0..n).map(|i| (i + 1..n).filter(|&j| self.combined[[i, j]] != 0.0).count()).sum()
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord::from_graph(self)
    }
}

/// Link, build vertices, compute and normalize the four views, combine and
/// mask them, then renormalize. With all alphas zero the combined adjacency
/// is empty and `a_norm` is the identity.
pub fn build_doc_graph(
    doc: &Document,
    kg: &KnowledgeGraph,
    table: &EmbeddingTable,
    config: &GraphConfig,
) -> Result<DocGraph, GraphError> {
    config.validate()?;
    let mentions = link_entities(doc, kg);
    let VertexSet { vertices, x0, sequence } = build_vertices(doc, &mentions, kg, table, config.filter_stopwords)?;
    let n = vertices.len();
    let raw = [
        view1_cooccurrence(&sequence, n, config.window)?,
        view2_kg_distance(&vertices, kg, config.max_depth)?,
        view3_description_sim(&vertices, kg)?,
        view4_cosine(&x0),
    ];
    let views = raw.map(|v| normalize_view(&v));
    let combined = if config.alphas.iter().all(|&a| a == 0.0) {
        Array2::zeros((n, n))
    } else {
        combine_and_mask(&views, config.alphas, config.gamma)?
    };
    let a_norm = renormalize(&combined);
    Ok(DocGraph {
        doc_id: doc.id.clone(),
        label: doc.label,
        tokens: doc.tokens.clone(),
        vertices,
        x0,
        views,
        config: config.clone(),
        combined,
        a_norm,
    })
}

/// Builds every document's graph, fanning out over documents.
pub fn build_corpus_graphs(
    corpus: &Corpus,
    kg: &KnowledgeGraph,
    table: &EmbeddingTable,
    config: &GraphConfig,
    exec: Execution,
) -> Result<Vec<DocGraph>, GraphError> {
    config.validate()?;
    exec.try_map(&corpus.documents, |doc| build_doc_graph(doc, kg, table, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingTable;
    use crate::knowledge_graph::Entity;

    fn kg() -> KnowledgeGraph {
        let e = |id: &str, name: &str, desc: &str| Entity {
            id: id.into(),
            name: name.into(),
            aliases: vec![],
            description: desc.into(),
        };
        KnowledgeGraph::new(
            vec![e("E1", "heart failure", "heart pump failure"), e("E2", "acute heart failure", "acute heart pump failure"), e("E3", "edema", "fluid")],
            vec![("E1".into(), "E2".into()), ("E2".into(), "E3".into())],
        )
        .unwrap()
    }

    fn table() -> EmbeddingTable {
        let rows = [("acute", [1.0, 0.0]), ("heart", [1.0, 1.0]), ("failure", [0.0, 1.0]), ("edema", [-1.0, 0.5])];
        EmbeddingTable::from_entries(2, rows.iter().map(|(t, v)| (t.to_string(), v.to_vec()))).unwrap()
    }

    #[test]
    fn words_unique_in_first_appearance_order() {
        let doc = Document::new("d", "fever cough fever", 0, 100);
        let vs = build_vertices(&doc, &[], &kg(), &table(), true).unwrap();
        let keys: Vec<&str> = vs.vertices.iter().map(|v| v.key.as_str()).collect();
        assert_eq!(keys, ["fever", "cough"]);
        assert_eq!(vs.sequence, [0, 1, 0]);
    }

    #[test]
    fn entity_emitted_before_first_span_word() {
        let doc = Document::new("d", "acute heart failure", 0, 100);
        let m = link_entities(&doc, &kg());
        let vs = build_vertices(&doc, &m, &kg(), &table(), true).unwrap();
        let kinds: Vec<(VertexKind, &str)> = vs.vertices.iter().map(|v| (v.kind, v.key.as_str())).collect();
        assert_eq!(
            kinds,
            [(VertexKind::Entity, "E2"), (VertexKind::Word, "acute"), (VertexKind::Word, "heart"), (VertexKind::Word, "failure")]
        );
        assert_eq!(vs.sequence, [0, 1, 2, 3]);
        // entity row = mean of its name words
        assert_eq!(vs.x0.row(0).to_vec(), vec![2.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn stopword_only_and_empty_docs_fail() {
        for text in ["", "the of and"] {
            let doc = Document::new("d", text, 0, 100);
            assert!(matches!(build_vertices(&doc, &[], &kg(), &table(), true), Err(GraphError::EmptyGraph(_))));
        }
        let doc = Document::new("d", "the", 0, 100);
        assert_eq!(build_vertices(&doc, &[], &kg(), &table(), false).unwrap().vertices.len(), 1);
    }

    #[test]
    fn build_is_deterministic_and_consistent() {
        let doc = Document::new("d", "Acute heart failure with edema; heart failure worsening, edema.", 1, 100);
        let cfg = GraphConfig::default();
        let a = build_doc_graph(&doc, &kg(), &table(), &cfg).unwrap();
        let b = build_doc_graph(&doc, &kg(), &table(), &cfg).unwrap();
        assert_eq!(a, b);
        let n = a.n_vertices();
        assert_eq!(a.x0.dim(), (n, 2));
        assert_eq!(a.a_norm.dim(), (n, n));
        assert!(a.combined.iter().all(|&x| x == 0.0 || x > cfg.gamma));
    }

    #[test]
    fn single_view_alphas_reproduce_that_view() {
        let doc = Document::new("d", "acute heart failure with edema and heart failure", 1, 100);
        for v in 0..4 {
            let mut alphas = [0.0; 4];
            alphas[v] = 1.0;
            let cfg = GraphConfig { alphas, gamma: 0.0, ..GraphConfig::default() };
            let g = build_doc_graph(&doc, &kg(), &table(), &cfg).unwrap();
            assert_eq!(g.combined, g.views[v].matrix, "view {}", v + 1);
        }
    }

    #[test]
    fn gamma_one_masks_everything() {
        let doc = Document::new("d", "acute heart failure with edema and heart failure", 1, 100);
        let cfg = GraphConfig { gamma: 1.0, ..GraphConfig::default() };
        let g = build_doc_graph(&doc, &kg(), &table(), &cfg).unwrap();
        assert_eq!(g.n_edges(), 0);
        assert_eq!(g.a_norm, Array2::<f64>::eye(g.n_vertices()));
    }

    #[test]
    fn zero_alphas_give_identity_propagation() {
        let doc = Document::new("d", "acute heart failure with edema", 1, 100);
        let cfg = GraphConfig { alphas: [0.0; 4], ..GraphConfig::default() };
        let g = build_doc_graph(&doc, &kg(), &table(), &cfg).unwrap();
        assert_eq!(g.a_norm, Array2::<f64>::eye(g.n_vertices()));
    }

    #[test]
    fn config_validation() {
        assert!(matches!(GraphConfig { window: 1, ..Default::default() }.validate(), Err(GraphError::InvalidWindow(1))));
        assert!(matches!(
            GraphConfig { alphas: [0.5, -0.1, 0.0, 0.0], ..Default::default() }.validate(),
            Err(GraphError::InvalidAlphas(_))
        ));
        assert!(GraphConfig::default().validate().is_ok());
        assert_eq!(GraphConfig::default().without_views(&[1, 3]).alphas, [0.0, 0.25, 0.0, 0.25]);
    }
}
