use std::collections::BTreeSet;

use ndarray::Array2;

use super::{GraphError, Vertex, VertexKind};
use crate::knowledge_graph::{description_overlap, shortest_path_weights, KnowledgeGraph};

/// Symmetric, non-negative, zero-diagonal adjacency for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    /// 1..=4
    pub view_id: u8,
    pub matrix: Array2<f64>,
}

impl ViewMatrix {
    pub fn new(view_id: u8, matrix: Array2<f64>) -> Self {
        ViewMatrix { view_id, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Window co-occurrence counts over the vertex occurrence sequence. Every
/// unordered pair of distinct vertices inside a window gains 1 per window.
/// A sequence shorter than the window is treated as one window.
pub fn view1_cooccurrence(sequence: &[usize], n: usize, window: usize) -> Result<ViewMatrix, GraphError> {
    if window < 2 {
        return Err(GraphError::InvalidWindow(window));
    }
    let mut m = Array2::zeros((n, n));
    if sequence.is_empty() {
        return Ok(ViewMatrix::new(1, m));
    }
    let span = window.min(sequence.len());
    for w in sequence.windows(span) {
        let present: BTreeSet<usize> = w.iter().copied().collect();
        let present: Vec<usize> = present.into_iter().collect();
        for (k, &a) in present.iter().enumerate() {
            for &b in &present[k + 1..] {
                m[[a, b]] += 1.0;
                m[[b, a]] += 1.0;
            }
        }
    }
    Ok(ViewMatrix::new(1, m))
}

fn entity_positions(vertices: &[Vertex]) -> Vec<usize> {
    vertices.iter().enumerate().filter(|(_, v)| v.kind == VertexKind::Entity).map(|(i, _)| i).collect()
}

/// Reciprocal KG distance between entity vertices; zero for anything
/// involving a word vertex.
pub fn view2_kg_distance(vertices: &[Vertex], kg: &KnowledgeGraph, max_depth: usize) -> Result<ViewMatrix, GraphError> {
    let pos = entity_positions(vertices);
    let ids: Vec<&str> = pos.iter().map(|&i| vertices[i].key.as_str()).collect();
    let w = shortest_path_weights(&ids, kg, max_depth)?;
    let n = vertices.len();
    let mut m = Array2::zeros((n, n));
    for (a, &i) in pos.iter().enumerate() {
        for (b, &j) in pos.iter().enumerate() {
            m[[i, j]] = w[[a, b]];
        }
    }
    Ok(ViewMatrix::new(2, m))
}

/// Description Jaccard overlap between entity vertices.
pub fn view3_description_sim(vertices: &[Vertex], kg: &KnowledgeGraph) -> Result<ViewMatrix, GraphError> {
    let pos = entity_positions(vertices);
    let entities = pos
        .iter()
        .map(|&i| kg.entity(&vertices[i].key).ok_or_else(|| GraphError::UnknownEntity(vertices[i].key.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let n = vertices.len();
    let mut m = Array2::zeros((n, n));
    for a in 0..pos.len() {
        for b in a + 1..pos.len() {
            let s = description_overlap(entities[a], entities[b]);
            m[[pos[a], pos[b]]] = s;
            m[[pos[b], pos[a]]] = s;
        }
    }
    Ok(ViewMatrix::new(3, m))
}

/// Pairwise cosine of feature rows, negatives clamped to zero. Rows with zero
/// norm have no edges.
pub fn view4_cosine(x0: &Array2<f64>) -> ViewMatrix {
    let n = x0.nrows();
    let norms: Vec<f64> = x0.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let c = (x0.row(i).dot(&x0.row(j)) / (norms[i] * norms[j])).clamp(0.0, 1.0);
            m[[i, j]] = c;
            m[[j, i]] = c;
        }
    }
    ViewMatrix::new(4, m)
}

/// Scales by the largest entry so the maximum becomes 1. An all-zero matrix
/// is returned unchanged.
pub fn normalize_view(view: &ViewMatrix) -> ViewMatrix {
    let max = view.matrix.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        ViewMatrix::new(view.view_id, view.matrix.mapv(|x| x / max))
    } else {
        view.clone()
    }
}

/// Weighted sum of the views; entries `<= gamma` are zeroed.
pub fn combine_and_mask(views: &[ViewMatrix; 4], alphas: [f64; 4], gamma: f64) -> Result<Array2<f64>, GraphError> {
    if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(GraphError::InvalidAlphas(alphas));
    }
    if alphas.iter().all(|&a| a == 0.0) {
        return Err(GraphError::AllAlphasZero);
    }
    let n = views[0].dim();
    let mut a = Array2::zeros((n, n));
    for (v, &alpha) in views.iter().zip(&alphas) {
        if alpha != 0.0 {
            a.scaled_add(alpha, &v.matrix);
        }
    }
    a.mapv_inplace(|x| if x > gamma { x } else { 0.0 });
    Ok(a)
}

/// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
pub fn renormalize(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let a_hat = a + &Array2::<f64>::eye(n);
    let inv_sqrt: Vec<f64> = a_hat.rows().into_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a_hat[[i, j]] * (inv_sqrt[i] * inv_sqrt[j]))
}
