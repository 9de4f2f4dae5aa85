//! External knowledge graph: entities with aliases and descriptions, plus
//! undirected relations between them.

mod linker;
mod paths;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Corpus, Document};

pub use linker::EntityLinker;
pub use paths::{shortest_path_weights, DEFAULT_MAX_DEPTH};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed knowledge graph: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate entity id {0:?}")]
    DuplicateEntity(String),
    #[error("unknown entity id {0:?}")]
    UnknownEntity(String),
    #[error("self edge on entity {0:?}")]
    SelfEdge(String),
    #[error("entity {0:?} has an empty name")]
    EmptyName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub description: String,
}

/// A linked span `[start, end)` over a document's tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct KgFile {
    entities: Vec<Entity>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
    linker: EntityLinker,
}

fn normalize_aliases(name: &str, aliases: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    std::iter::once(name)
        .chain(aliases.iter().map(String::as_str))
        .map(|a| a.trim().to_lowercase())
        .filter(|a| !a.is_empty() && seen.insert(a.clone()))
        .collect()
}

impl KnowledgeGraph {
    /// Validates and indexes entities and edges. Aliases are lowercased and
    /// deduplicated, with the entity name added as the first alias. Repeated
    /// edges (in either orientation) are stored once.
    pub fn new(entities: Vec<Entity>, edges: Vec<(String, String)>) -> Result<Self, KgError> {
        let mut index = HashMap::with_capacity(entities.len());
        let mut normalized = Vec::with_capacity(entities.len());
        for (i, mut e) in entities.into_iter().enumerate() {
            if e.name.trim().is_empty() {
                return Err(KgError::EmptyName(e.id));
            }
            if index.insert(e.id.clone(), i).is_some() {
                return Err(KgError::DuplicateEntity(e.id));
            }
            e.aliases = normalize_aliases(&e.name, &e.aliases);
            normalized.push(e);
        }
        let mut neighbors = vec![Vec::new(); normalized.len()];
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            let ia = *index.get(&a).ok_or_else(|| KgError::UnknownEntity(a.clone()))?;
            let ib = *index.get(&b).ok_or_else(|| KgError::UnknownEntity(b.clone()))?;
            if ia == ib {
                return Err(KgError::SelfEdge(a));
            }
            if edge_set.insert((ia.min(ib), ia.max(ib))) {
                neighbors[ia].push(ib);
                neighbors[ib].push(ia);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        let linker = EntityLinker::new(&normalized);
        Ok(KnowledgeGraph { entities: normalized, index, neighbors, edges: edge_set, linker })
    }

    pub fn from_json(text: &str) -> Result<Self, KgError> {
        let file: KgFile = serde_json::from_str(text)?;
        Self::new(file.entities, file.edges)
    }

    pub fn to_json(&self) -> String {
        let file = KgFile {
            entities: self.entities.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (self.entities[a].id.clone(), self.entities[b].id.clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("knowledge graph serializes")
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_json().as_bytes())?;
        out.write_all(b"\n")
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.index.get(id).map(|&i| &self.entities[i])
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.neighbors[index]
    }

    /// Undirected edges as `(lower index, higher index)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn linker(&self) -> &EntityLinker {
        &self.linker
    }

    /// Hop distances from `source` up to `max_depth`; `None` when unreachable
    /// within that budget.
    pub fn bfs_distances(&self, source: usize, max_depth: usize) -> Vec<Option<usize>> {
        paths::bfs(&self.neighbors, source, max_depth)
    }
}

pub fn load_kg(path: impl AsRef<Path>) -> Result<KnowledgeGraph, KgError> {
    let text = std::fs::read_to_string(path)?;
    KnowledgeGraph::from_json(&text)
}

/// Greedy left-to-right longest-match linking of `doc` against the alias
/// dictionary of `kg`.
pub fn link_entities(doc: &Document, kg: &KnowledgeGraph) -> Vec<EntityMention> {
    kg.linker().link(&doc.tokens, kg.entities())
}

/// Jaccard similarity of the description token sets; 0 when either is empty.
pub fn description_overlap(a: &Entity, b: &Entity) -> f64 {
    let ta: HashSet<String> = tokenize(&a.description, usize::MAX).into_iter().collect();
    let tb: HashSet<String> = tokenize(&b.description, usize::MAX).into_iter().collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let inter = ta.intersection(&tb).count();
    let union = ta.len() + tb.len() - inter;
    inter as f64 / union as f64
}

/// Corpus-level linker coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub n_docs: usize,
    pub total_mentions: usize,
    pub mean_mentions_per_doc: f64,
    pub mean_distinct_entities_per_doc: f64,
    pub zero_mention_share: f64,
    /// Share of KG entities linked at least once anywhere in the corpus.
    pub entity_coverage: f64,
}

pub fn link_stats(corpus: &Corpus, kg: &KnowledgeGraph) -> LinkStats {
    let n_docs = corpus.len();
    let mut total_mentions = 0usize;
    let mut distinct_sum = 0usize;
    let mut zero_docs = 0usize;
    let mut linked: HashSet<String> = HashSet::new();
    for doc in &corpus.documents {
        let mentions = link_entities(doc, kg);
        total_mentions += mentions.len();
        if mentions.is_empty() {
            zero_docs += 1;
        }
        let distinct: HashSet<&str> = mentions.iter().map(|m| m.entity_id.as_str()).collect();
        distinct_sum += distinct.len();
        linked.extend(distinct.into_iter().map(str::to_owned));
    }
    let per_doc = |x: usize| if n_docs == 0 { 0.0 } else { x as f64 / n_docs as f64 };
    LinkStats {
        n_docs,
        total_mentions,
        mean_mentions_per_doc: per_doc(total_mentions),
        mean_distinct_entities_per_doc: per_doc(distinct_sum),
        zero_mention_share: per_doc(zero_docs),
        entity_coverage: if kg.is_empty() { 0.0 } else { linked.len() as f64 / kg.len() as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: &str, name: &str, aliases: &[&str], description: &str) -> Entity {
        Entity {
            id: id.into(),
            name: name.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
            description: description.into(),
        }
    }

    #[test]
    fn load_normalizes_aliases() {
        let kg = KnowledgeGraph::from_json(
            r#"{"entities":[{"id":"E1","name":"Heart Failure","aliases":["CHF","chf"],"description":"..."}],"edges":[]}"#,
        )
        .unwrap();
        let e = kg.entity("E1").unwrap();
        let set: BTreeSet<&str> = e.aliases.iter().map(String::as_str).collect();
        assert_eq!(set, BTreeSet::from(["heart failure", "chf"]));
        assert_eq!(e.aliases.len(), 2);
    }

    #[test]
    fn load_rejects_bad_edges() {
        let unknown = r#"{"entities":[{"id":"E1","name":"x"}],"edges":[["E1","E9"]]}"#;
        assert!(matches!(KnowledgeGraph::from_json(unknown), Err(KgError::UnknownEntity(id)) if id == "E9"));
        let selfe = r#"{"entities":[{"id":"E1","name":"x"}],"edges":[["E1","E1"]]}"#;
        assert!(matches!(KnowledgeGraph::from_json(selfe), Err(KgError::SelfEdge(_))));
        let dup = r#"{"entities":[{"id":"E1","name":"x"},{"id":"E1","name":"y"}],"edges":[]}"#;
        assert!(matches!(KnowledgeGraph::from_json(dup), Err(KgError::DuplicateEntity(_))));
        let empty = r#"{"entities":[{"id":"E1","name":"  "}],"edges":[]}"#;
        assert!(matches!(KnowledgeGraph::from_json(empty), Err(KgError::EmptyName(_))));
    }

    #[test]
    fn repeated_edges_stored_once() {
        let kg = KnowledgeGraph::new(
            vec![entity("A", "a", &[], ""), entity("B", "b", &[], "")],
            vec![("A".into(), "B".into()), ("B".into(), "A".into())],
        )
        .unwrap();
        assert_eq!(kg.edges().count(), 1);
        assert_eq!(kg.neighbors(0), &[1]);
    }

    #[test]
    fn json_round_trip() {
        let kg = KnowledgeGraph::new(
            vec![entity("A", "Alpha", &["al"], "first"), entity("B", "beta", &[], "")],
            vec![("B".into(), "A".into())],
        )
        .unwrap();
        let back = KnowledgeGraph::from_json(&kg.to_json()).unwrap();
        assert_eq!(back.entities(), kg.entities());
        assert_eq!(back.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn jaccard_examples() {
        let a = entity("A", "a", &[], "acute heart failure");
        let b = entity("B", "b", &[], "chronic heart failure");
        let empty = entity("C", "c", &[], "");
        assert_eq!(description_overlap(&a, &b), 0.5);
        assert_eq!(description_overlap(&a, &a), 1.0);
        assert_eq!(description_overlap(&empty, &a), 0.0);
        assert_eq!(description_overlap(&empty, &empty), 0.0);
    }

    #[test]
    fn stats_on_unlinked_and_linked() {
        let kg = KnowledgeGraph::new(vec![entity("E1", "chf", &[], ""), entity("E2", "copd", &[], "")], vec![])
            .unwrap();
        let none = Corpus::from_documents(vec![Document::new("d", "hello world", 0, 100)]).unwrap();
        let s = link_stats(&none, &kg);
        assert_eq!(s.entity_coverage, 0.0);
        assert_eq!(s.zero_mention_share, 1.0);
        let one = Corpus::from_documents(vec![Document::new("d", "chf then chf", 1, 100)]).unwrap();
        let s = link_stats(&one, &kg);
        assert_eq!(s.mean_mentions_per_doc, 2.0);
        assert_eq!(s.mean_distinct_entities_per_doc, 1.0);
        assert_eq!(s.entity_coverage, 0.5);
    }
}
