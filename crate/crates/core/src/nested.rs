//! Conversions between ndarray matrices and nested `Vec`s for JSON files.

use ndarray::Array2;

pub fn matrix_to_nested(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// `cols` is needed for zero-row matrices, whose width JSON cannot carry.
pub fn nested_to_matrix(rows: &[Vec<f64>], cols: usize) -> Result<Array2<f64>, String> {
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(format!("row {bad} has {} entries, expected {cols}", rows[bad].len()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| e.to_string())
}
