use std::collections::VecDeque;

use ndarray::Array2;

use super::{KgError, KnowledgeGraph};

/// Hop budget for intra-graph distances; farther pairs count as unreachable.
pub const DEFAULT_MAX_DEPTH: usize = 4;

pub(super) fn bfs(neighbors: &[Vec<usize>], source: usize, max_depth: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; neighbors.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        if du >= max_depth {
            continue;
        }
        for &v in &neighbors[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Reciprocal hop-distance weights between the given entities.
///
/// Entry `(i, j)` is `1/d` for a BFS distance `1 <= d <= max_depth` and `0`
/// otherwise; the diagonal is zero. Repeated ids are allowed and also get 0.
pub fn shortest_path_weights(
    entity_ids: &[&str],
    kg: &KnowledgeGraph,
    max_depth: usize,
) -> Result<Array2<f64>, KgError> {
    let idx: Vec<usize> = entity_ids
        .iter()
        .map(|id| kg.entity_index(id).ok_or_else(|| KgError::UnknownEntity(id.to_string())))
        .collect::<Result<_, _>>()?;
    let k = idx.len();
    let mut w = Array2::zeros((k, k));
    for i in 0..k {
        let dist = kg.bfs_distances(idx[i], max_depth);
        for j in (i + 1)..k {
            if let Some(d) = dist[idx[j]] {
                if d >= 1 {
                    let v = 1.0 / d as f64;
                    w[[i, j]] = v;
                    w[[j, i]] = v;
                }
            }
        }
    }
    Ok(w)
}
