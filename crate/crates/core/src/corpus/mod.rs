//! Labeled documents: tokenization, JSON-lines loading, seeded splits and a
//! synthetic planted-signal generator.

mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{generate_synthetic, generate_synthetic_with, SynthConfig, SyntheticData, MIN_DOCS, MIN_ENTITIES};

/// Default token budget per document.
pub const DEFAULT_MAX_TOKENS: usize = 2000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: invalid label {label}, expected 0 or 1")]
    InvalidLabel { line: usize, label: i64 },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
}

/// Lowercases `raw_text`, splits it on every non-alphanumeric run and keeps
/// the first `max_tokens` tokens.
pub fn tokenize(raw_text: &str, max_tokens: usize) -> Vec<String> {
    // Lowercase before splitting: some lowercase mappings emit combining marks.
    raw_text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(max_tokens)
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, label: u8, max_tokens: usize) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text, max_tokens);
        Document { id: id.into(), raw_text, tokens, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub split_assignment: BTreeMap<String, Split>,
}

/// On-disk record: exactly `{"id", "text", "label"}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusRecord {
    id: String,
    text: String,
    label: i64,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, doc) in documents.iter().enumerate() {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId { line: i + 1, id: doc.id.clone() });
            }
            if doc.label > 1 {
                return Err(CorpusError::InvalidLabel { line: i + 1, label: doc.label as i64 });
            }
        }
        Ok(Corpus { documents, split_assignment: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split_assignment.get(id).copied()
    }

    /// Documents assigned to `split`, in corpus order.
    pub fn documents_in(&self, split: Split) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(move |d| self.split_of(&d.id) == Some(split))
    }

    /// Writes the corpus as JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.documents {
            let rec = CorpusRecord { id: doc.id.clone(), text: doc.raw_text.clone(), label: doc.label as i64 };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Reads a JSON-lines corpus. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, max_tokens: usize) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, reason: e.to_string() })?;
        if rec.label != 0 && rec.label != 1 {
            return Err(CorpusError::InvalidLabel { line: line_no, label: rec.label });
        }
        if seen.insert(rec.id.clone(), line_no).is_some() {
            return Err(CorpusError::DuplicateId { line: line_no, id: rec.id });
        }
        documents.push(Document::new(rec.id, rec.text, rec.label as u8, max_tokens));
    }
    Ok(Corpus { documents, split_assignment: BTreeMap::new() })
}

pub fn load_corpus(path: impl AsRef<Path>, max_tokens: usize) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(BufReader::new(file), max_tokens)
}

/// Assigns every document to train/validation/test after a seeded shuffle.
///
/// Train and validation sizes are `round(n * ratio)`; test takes the rest.
pub fn split_corpus(corpus: &Corpus, ratios: [f64; 3], seed: u64) -> Result<Corpus, CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(ratios));
    }
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((n as f64) * ratios[0]).round() as usize;
    let n_val = (((n as f64) * ratios[1]).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);

    let mut split_assignment = BTreeMap::new();
    for (rank, &i) in order.iter().enumerate() {
        let split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
        split_assignment.insert(corpus.documents[i].id.clone(), split);
    }
    Ok(Corpus { documents: corpus.documents.clone(), split_assignment })
}

/// Dense token index built from the training split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Collects every token of the train split. Indices follow sorted order.
    pub fn from_train_split(corpus: &Corpus) -> Self {
        let set: BTreeSet<&str> = corpus
            .documents_in(Split::Train)
            .flat_map(|d| d.tokens.iter().map(String::as_str))
            .collect();
        Self::from_tokens(set)
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let sorted: BTreeSet<&str> = tokens.into_iter().collect();
        let tokens: Vec<String> = sorted.into_iter().map(str::to_owned).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { index, tokens }
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
