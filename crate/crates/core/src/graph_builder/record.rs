//! On-disk graph format: one versioned JSON file per document plus a
//! manifest listing ids, labels and splits.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DocGraph, GraphError, Vertex};
use crate::corpus::Split;
use crate::nested::{matrix_to_nested, nested_to_matrix};

pub const GRAPH_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetadata {
    pub alphas: [f64; 4],
    pub gamma: f64,
    pub window: usize,
    pub max_depth: usize,
}

/// Serialized subset of a [`DocGraph`]: what training and prediction need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub format_version: u32,
    pub doc_id: String,
    pub label: u8,
    pub tokens: Vec<String>,
    pub vertices: Vec<Vertex>,
    pub feature_dim: usize,
    pub x0: Vec<Vec<f64>>,
    pub a_combined: Vec<Vec<f64>>,
    pub a_norm: Vec<Vec<f64>>,
    pub metadata: GraphMetadata,
}

impl GraphRecord {
    pub fn from_graph(g: &DocGraph) -> Self {
        GraphRecord {
            format_version: GRAPH_FORMAT_VERSION,
            doc_id: g.doc_id.clone(),
            label: g.label,
            tokens: g.tokens.clone(),
            vertices: g.vertices.clone(),
            feature_dim: g.x0.ncols(),
            x0: matrix_to_nested(&g.x0),
            a_combined: matrix_to_nested(&g.combined),
            a_norm: matrix_to_nested(&g.a_norm),
            metadata: GraphMetadata {
                alphas: g.config.alphas,
                gamma: g.config.gamma,
                window: g.config.window,
                max_depth: g.config.max_depth,
            },
        }
    }

    pub fn x0_matrix(&self) -> Result<Array2<f64>, String> {
        nested_to_matrix(&self.x0, self.feature_dim)
    }

    pub fn a_norm_matrix(&self) -> Result<Array2<f64>, String> {
        nested_to_matrix(&self.a_norm, self.vertices.len())
    }

    pub fn a_combined_matrix(&self) -> Result<Array2<f64>, String> {
        nested_to_matrix(&self.a_combined, self.vertices.len())
    }

    fn check(&self) -> Result<(), String> {
        if self.format_version != GRAPH_FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", self.format_version));
        }
        let n = self.vertices.len();
        if self.x0.len() != n || self.a_norm.len() != n || self.a_combined.len() != n {
            return Err(format!("matrix row counts disagree with {n} vertices"));
        }
        self.x0_matrix()?;
        self.a_norm_matrix()?;
        self.a_combined_matrix()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub label: u8,
    pub split: Option<Split>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub format_version: u32,
    pub documents: Vec<ManifestEntry>,
}

fn file_name(index: usize, doc_id: &str) -> String {
    let safe: String = doc_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(64)
        .collect();
    format!("{index:06}_{safe}.json")
}

/// Writes `graphs/<file>.json` per document and `manifest.json` into `dir`.
pub fn write_graph_dir(
    dir: &Path,
    graphs: &[DocGraph],
    splits: &BTreeMap<String, Split>,
) -> Result<GraphManifest, GraphError> {
    let graph_dir = dir.join("graphs");
    std::fs::create_dir_all(&graph_dir)?;
    let mut documents = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        let file = format!("graphs/{}", file_name(i, &g.doc_id));
        let out = BufWriter::new(std::fs::File::create(dir.join(&file))?);
        serde_json::to_writer(out, &g.to_record()).map_err(|e| GraphError::Format { path: file.clone(), reason: e.to_string() })?;
        documents.push(ManifestEntry { doc_id: g.doc_id.clone(), label: g.label, split: splits.get(&g.doc_id).copied(), file });
    }
    let manifest = GraphManifest { format_version: GRAPH_FORMAT_VERSION, documents };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(manifest)
}

/// Reads the manifest and every graph it lists, in manifest order.
pub fn read_graph_dir(dir: &Path) -> Result<(GraphManifest, Vec<GraphRecord>), GraphError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let fmt_err = |p: &Path, reason: String| GraphError::Format { path: p.display().to_string(), reason };
    let manifest: GraphManifest = serde_json::from_reader(BufReader::new(std::fs::File::open(&manifest_path)?))
        .map_err(|e| fmt_err(&manifest_path, e.to_string()))?;
    let mut records = Vec::with_capacity(manifest.documents.len());
    for entry in &manifest.documents {
        let path = dir.join(&entry.file);
        let rec: GraphRecord = serde_json::from_reader(BufReader::new(std::fs::File::open(&path)?))
            .map_err(|e| fmt_err(&path, e.to_string()))?;
        rec.check().map_err(|r| fmt_err(&path, r))?;
        if rec.doc_id != entry.doc_id {
            return Err(fmt_err(&path, format!("doc_id {:?} does not match manifest {:?}", rec.doc_id, entry.doc_id)));
        }
        records.push(rec);
    }
    Ok((manifest, records))
}
