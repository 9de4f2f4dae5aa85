//! Seeded planted-signal corpus with a matching knowledge graph and
//! embedding table.
//!
//! Entities form two clusters joined through one bridge entity, so every
//! cross-cluster path is at least two hops. Positive documents mention at
//! least two aliases from the "risk" cluster, negatives at least two from the
//! other cluster, and both share filler vocabulary. Alias words of a cluster
//! sit near a common centroid in embedding space.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Document, DEFAULT_MAX_TOKENS};
use crate::embeddings::EmbeddingTable;
use crate::knowledge_graph::{Entity, KnowledgeGraph};
use crate::stopwords::is_stopword;

pub const MIN_DOCS: usize = 10;
pub const MIN_ENTITIES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub n_entities: usize,
    pub seed: u64,
    /// Embedding dimensionality of the generated table.
    pub dim: usize,
    pub filler_words: usize,
    /// Inclusive range of filler tokens per document.
    pub filler_per_doc: (usize, usize),
    /// Inclusive range of cluster mentions per document.
    pub mentions_per_doc: (usize, usize),
}

impl SynthConfig {
    pub fn new(n_docs: usize, n_entities: usize, seed: u64) -> Self {
        SynthConfig {
            n_docs,
            n_entities,
            seed,
            dim: 32,
            filler_words: 40,
            filler_per_doc: (14, 28),
            mentions_per_doc: (2, 4),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub kg: KnowledgeGraph,
    pub embeddings: EmbeddingTable,
    pub risk_entities: Vec<String>,
    pub safe_entities: Vec<String>,
    pub bridge_entity: String,
}

impl SyntheticData {
    pub const CORPUS_FILE: &'static str = "corpus.jsonl";
    pub const KG_FILE: &'static str = "kg.json";
    pub const EMBEDDINGS_FILE: &'static str = "embeddings.txt";

    /// Writes the corpus, graph and embedding files into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<[PathBuf; 3]> {
        std::fs::create_dir_all(dir)?;
        let paths = [dir.join(Self::CORPUS_FILE), dir.join(Self::KG_FILE), dir.join(Self::EMBEDDINGS_FILE)];
        self.corpus.write_jsonl(std::io::BufWriter::new(std::fs::File::create(&paths[0])?))?;
        self.kg.write_json(std::io::BufWriter::new(std::fs::File::create(&paths[1])?))?;
        self.embeddings.write_text(std::io::BufWriter::new(std::fs::File::create(&paths[2])?))?;
        Ok(paths)
    }
}

/// Panics when `n_docs < 10` or `n_entities < 8`.
pub fn generate_synthetic(n_docs: usize, n_entities: usize, seed: u64) -> SyntheticData {
    generate_synthetic_with(&SynthConfig::new(n_docs, n_entities, seed))
}

struct WordMint {
    used: HashSet<String>,
}

impl WordMint {
    fn mint(&mut self, rng: &mut ChaCha8Rng) -> String {
        const CONS: &[u8] = b"bcdfghklmnprstvz";
        const VOWELS: &[u8] = b"aeiou";
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONS[rng.gen_range(0..CONS.len())] as char);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if rng.gen_bool(0.4) {
                w.push(CONS[rng.gen_range(0..CONS.len())] as char);
            }
            if !is_stopword(&w) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

pub fn generate_synthetic_with(cfg: &SynthConfig) -> SyntheticData {
    assert!(cfg.n_docs >= MIN_DOCS, "need at least {MIN_DOCS} documents");
    assert!(cfg.n_entities >= MIN_ENTITIES, "need at least {MIN_ENTITIES} entities");
    assert!(cfg.mentions_per_doc.0 >= 2 && cfg.mentions_per_doc.0 <= cfg.mentions_per_doc.1);
    assert!(cfg.filler_per_doc.0 <= cfg.filler_per_doc.1 && cfg.filler_words > 0 && cfg.dim > 0);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mint = WordMint { used: HashSet::new() };

    let n_cluster = cfg.n_entities - 1;
    let n_risk = n_cluster / 2;
    let cluster_of = |i: usize| if i < n_risk { 0 } else if i < n_cluster { 1 } else { 2 };

    let general_desc: Vec<String> = (0..8).map(|_| mint.mint(&mut rng)).collect();
    let cluster_desc: [Vec<String>; 2] =
        [(0..6).map(|_| mint.mint(&mut rng)).collect(), (0..6).map(|_| mint.mint(&mut rng)).collect()];

    // Surface forms per entity: name words and a one-word alias.
    let mut entities = Vec::with_capacity(cfg.n_entities);
    let mut surface_forms: Vec<Vec<String>> = Vec::with_capacity(cfg.n_entities);
    for i in 0..cfg.n_entities {
        let name_len = rng.gen_range(1..=2);
        let name: Vec<String> = (0..name_len).map(|_| mint.mint(&mut rng)).collect();
        let alias = mint.mint(&mut rng);
        let mut desc: Vec<&str> = match cluster_of(i) {
            2 => general_desc.choose_multiple(&mut rng, 5).map(String::as_str).collect(),
            c => {
                let mut d: Vec<&str> = cluster_desc[c].choose_multiple(&mut rng, 4).map(String::as_str).collect();
                d.extend(general_desc.choose_multiple(&mut rng, 2).map(String::as_str));
                d
            }
        };
        desc.shuffle(&mut rng);
        let name = name.join(" ");
        entities.push(Entity {
            id: format!("C{:07}", i + 1),
            name: name.clone(),
            aliases: vec![alias.clone()],
            description: desc.join(" "),
        });
        surface_forms.push(vec![name, alias]);
    }

    let mut edges = Vec::new();
    for (lo, hi) in [(0, n_risk), (n_risk, n_cluster)] {
        for i in lo + 1..hi {
            edges.push((entities[i - 1].id.clone(), entities[i].id.clone()));
        }
        for i in lo..hi {
            for j in i + 2..hi {
                if rng.gen_bool(0.3) {
                    edges.push((entities[i].id.clone(), entities[j].id.clone()));
                }
            }
        }
    }
    let bridge = entities[n_cluster].id.clone();
    edges.push((bridge.clone(), entities[0].id.clone()));
    edges.push((bridge.clone(), entities[n_risk].id.clone()));

    let filler: Vec<String> = (0..cfg.filler_words).map(|_| mint.mint(&mut rng)).collect();
    const GLUE: &[&str] = &["the", "with", "and", "of", "was", "on", "for"];

    // Embeddings: cluster words near a centroid, everything else noise.
    let centroid = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..cfg.dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let centroids = [centroid(&mut rng), centroid(&mut rng)];
    let round = |x: f64| (x * 1e6).round() / 1e6;
    let mut emb_entries: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, forms) in surface_forms.iter().enumerate() {
        for word in forms.iter().flat_map(|f| f.split(' ')) {
            let v = (0..cfg.dim)
                .map(|k| {
                    let noise: f64 = rng.gen_range(-1.0..1.0);
                    match cluster_of(i) {
                        2 => round(noise),
                        c => round(0.7 * centroids[c][k] + 0.3 * noise),
                    }
                })
                .collect();
            emb_entries.push((word.to_owned(), v));
        }
    }
    for word in general_desc.iter().chain(cluster_desc.iter().flatten()).chain(&filler) {
        let v = (0..cfg.dim).map(|_| round(rng.gen_range(-1.0..1.0))).collect();
        emb_entries.push((word.clone(), v));
    }
    let embeddings = EmbeddingTable::from_entries(cfg.dim, emb_entries).expect("consistent dimensions");

    let mut documents = Vec::with_capacity(cfg.n_docs);
    for d in 0..cfg.n_docs {
        let label: u8 = match d {
            0 => 1,
            1 => 0,
            _ => rng.gen_bool(0.5) as u8,
        };
        let members: Vec<usize> = if label == 1 { (0..n_risk).collect() } else { (n_risk..n_cluster).collect() };
        let n_mentions = rng.gen_range(cfg.mentions_per_doc.0..=cfg.mentions_per_doc.1);
        let mut segments: Vec<String> = (0..rng.gen_range(cfg.filler_per_doc.0..=cfg.filler_per_doc.1))
            .map(|_| {
                if rng.gen_bool(0.2) {
                    GLUE[rng.gen_range(0..GLUE.len())].to_owned()
                } else {
                    filler[rng.gen_range(0..filler.len())].clone()
                }
            })
            .collect();
        let mut mentions: Vec<String> = (0..n_mentions)
            .map(|_| {
                let e = members[rng.gen_range(0..members.len())];
                surface_forms[e][rng.gen_range(0..2)].clone()
            })
            .collect();
        if rng.gen_bool(0.3) {
            mentions.push(surface_forms[n_cluster][rng.gen_range(0..2)].clone());
        }
        for m in mentions {
            let at = rng.gen_range(0..=segments.len());
            segments.insert(at, m);
        }
        let mut text = String::new();
        for (k, seg) in segments.iter().enumerate() {
            if k > 0 {
                text.push_str(if k % 9 == 0 { ". " } else { " " });
            }
            text.push_str(seg);
        }
        text.push('.');
        documents.push(Document::new(format!("syn-{d:04}"), text, label, DEFAULT_MAX_TOKENS));
    }

    let kg = KnowledgeGraph::new(entities, edges).expect("generated graph is valid");
    let ids = |r: std::ops::Range<usize>| r.map(|i| kg.entities()[i].id.clone()).collect();
    SyntheticData {
        corpus: Corpus::from_documents(documents).expect("generated ids are unique"),
        risk_entities: ids(0..n_risk),
        safe_entities: ids(n_risk..n_cluster),
        bridge_entity: bridge,
        embeddings,
        kg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge_graph::{link_entities, link_stats};

    fn bytes(data: &SyntheticData) -> (Vec<u8>, String, Vec<u8>) {
        let mut c = Vec::new();
        data.corpus.write_jsonl(&mut c).unwrap();
        let mut e = Vec::new();
        data.embeddings.write_text(&mut e).unwrap();
        (c, data.kg.to_json(), e)
    }

    #[test]
    fn seed_deterministic() {
        assert_eq!(bytes(&generate_synthetic(100, 12, 1)), bytes(&generate_synthetic(100, 12, 1)));
        assert_ne!(bytes(&generate_synthetic(100, 12, 1)).0, bytes(&generate_synthetic(100, 12, 2)).0);
    }

    #[test]
    fn planted_mentions_by_label() {
        let data = generate_synthetic(100, 12, 1);
        let risk: HashSet<&str> = data.risk_entities.iter().map(String::as_str).collect();
        let safe: HashSet<&str> = data.safe_entities.iter().map(String::as_str).collect();
        assert!(risk.is_disjoint(&safe));
        for doc in &data.corpus.documents {
            let mentions = link_entities(doc, &data.kg);
            let n_risk = mentions.iter().filter(|m| risk.contains(m.entity_id.as_str())).count();
            let n_safe = mentions.iter().filter(|m| safe.contains(m.entity_id.as_str())).count();
            if doc.label == 1 {
                assert!(n_risk >= 2 && n_safe == 0, "{}", doc.raw_text);
            } else {
                assert!(n_safe >= 2 && n_risk == 0, "{}", doc.raw_text);
            }
        }
        assert_eq!(link_stats(&data.corpus, &data.kg).zero_mention_share, 0.0);
    }

    #[test]
    fn clusters_bridged_by_two_hops() {
        let data = generate_synthetic(20, 9, 3);
        let kg = &data.kg;
        for r in &data.risk_entities {
            let dist = kg.bfs_distances(kg.entity_index(r).unwrap(), usize::MAX);
            for s in &data.safe_entities {
                let d = dist[kg.entity_index(s).unwrap()].expect("clusters connected");
                assert!(d >= 2);
            }
        }
    }

    #[test]
    fn embeddings_cover_aliases() {
        let data = generate_synthetic(20, 8, 5);
        for e in data.kg.entities() {
            for alias in &e.aliases {
                for w in crate::corpus::tokenize(alias, usize::MAX) {
                    assert!(data.embeddings.contains(&w), "{w}");
                }
            }
        }
    }
}
