//! Word vectors in word2vec text format, with a deterministic fallback for
//! out-of-vocabulary tokens.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::tokenize;
use crate::knowledge_graph::Entity;

/// Dimensionality used when nothing else is specified.
pub const DEFAULT_DIM: usize = 200;
/// Half-width of the uniform range for out-of-vocabulary vectors.
pub const OOV_RANGE: f64 = 0.1;
pub const DEFAULT_OOV_SEED: u64 = 0x6d65_6474_6578_7400;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header line {0:?}, expected \"<vocab_size> <dim>\"")]
    Header(String),
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: unparsable float {value:?}")]
    ParseFloat { line: usize, value: String },
    #[error("header declares {declared} entries but the file has {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("entity {0:?} name has no tokens")]
    EmptyEntityName(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    vectors: Array2<f64>,
    oov_seed: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. A repeated token keeps its
    /// last vector.
    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self, EmbeddingError> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut tokens = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, (token, vec)) in entries.into_iter().enumerate() {
            if vec.len() != dim {
                return Err(EmbeddingError::DimensionMismatch { line: n + 2, expected: dim, found: vec.len() });
            }
            match index.get(&token) {
                Some(&i) => {
                    log::warn!("duplicate embedding for {token:?}; keeping the later vector");
                    rows[i] = vec;
                }
                None => {
                    index.insert(token.clone(), tokens.len());
                    tokens.push(token);
                    rows.push(vec);
                }
            }
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let vectors = Array2::from_shape_vec((tokens.len(), dim), flat).expect("row lengths checked");
        Ok(EmbeddingTable { dim, index, tokens, vectors, oov_seed: DEFAULT_OOV_SEED })
    }

    pub fn with_oov_seed(mut self, seed: u64) -> Self {
        self.oov_seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.index.get(token).map(|&i| self.vectors.row(i))
    }

    /// Stored vector, or a pseudo-random one seeded by the token hash.
    pub fn embed_word(&self, token: &str) -> Array1<f64> {
        match self.get(token) {
            Some(v) => v.to_owned(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ self.oov_seed);
                Array1::from_shape_fn(self.dim, |_| rng.gen_range(-OOV_RANGE..=OOV_RANGE))
            }
        }
    }

    /// Mean of the word vectors of the entity name's tokens.
    pub fn embed_entity(&self, entity: &Entity) -> Result<Array1<f64>, EmbeddingError> {
        let tokens = tokenize(&entity.name, usize::MAX);
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyEntityName(entity.id.clone()));
        }
        let mut sum = Array1::zeros(self.dim);
        for t in &tokens {
            sum += &self.embed_word(t);
        }
        Ok(sum / tokens.len() as f64)
    }

    /// Row-stacks `embed_word` over `tokens`.
    pub fn embed_sequence(&self, tokens: &[String]) -> Array2<f64> {
        let mut out = Array2::zeros((tokens.len(), self.dim));
        for (mut row, t) in out.rows_mut().into_iter().zip(tokens) {
            row.assign(&self.embed_word(t));
        }
        out
    }

    /// Writes word2vec text format; entries keep insertion order.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.tokens.len(), self.dim)?;
        for (token, row) in self.tokens.iter().zip(self.vectors.rows()) {
            write!(out, "{token}")?;
            for v in row {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let mut parts = header.split_whitespace();
    let (declared, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(a), Ok(b)) if b > 0 => (a, b),
            _ => return Err(EmbeddingError::Header(header)),
        },
        _ => return Err(EmbeddingError::Header(header)),
    };
    let mut entries = Vec::with_capacity(declared);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| EmbeddingError::ParseFloat { line: line_no, value: f.to_owned() }))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != dim {
            return Err(EmbeddingError::DimensionMismatch { line: line_no, expected: dim, found: values.len() });
        }
        entries.push((token.to_owned(), values));
    }
    if entries.len() != declared {
        return Err(EmbeddingError::CountMismatch { declared, found: entries.len() });
    }
    EmbeddingTable::from_entries(dim, entries)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbeddingError> {
    read_embeddings(BufReader::new(std::fs::File::open(path)?))
}
