use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Dims, Params};
use super::{ModelError, ModelState};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum TensorData {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// Versioned JSON snapshot of a [`ModelState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub dims: Dims,
    pub seed: u64,
    params: BTreeMap<String, TensorData>,
}

impl ModelState {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let params = self
            .params
            .named()
            .into_iter()
            .map(|(name, t)| {
                let data = match t.ndim() {
                    1 => TensorData::Vector(t.iter().copied().collect()),
                    _ => TensorData::Matrix(t.outer_iter().map(|r| r.iter().copied().collect()).collect()),
                };
                (name, data)
            })
            .collect();
        Checkpoint { format_version: CHECKPOINT_FORMAT_VERSION, dims: self.dims, seed: self.seed, params }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let bad = |m: String| ModelError::Checkpoint(m);
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(bad(format!("unsupported format_version {}", ck.format_version)));
        }
        if !ck.dims.is_valid() {
            return Err(ModelError::InvalidDims(ck.dims));
        }
        let mut params = Params::zeros(ck.dims);
        let mut expected = 0;
        for (name, mut view) in params.named_mut() {
            expected += 1;
            let data = ck.params.get(&name).ok_or_else(|| bad(format!("missing tensor {name}")))?;
            let flat: Vec<f64> = match (data, view.ndim()) {
                (TensorData::Vector(v), 1) => v.clone(),
                (TensorData::Matrix(rows), 2) if rows.iter().all(|r| r.len() == view.shape()[1]) => {
                    if rows.len() != view.shape()[0] {
                        return Err(bad(format!("tensor {name} has {} rows, expected {}", rows.len(), view.shape()[0])));
                    }
                    rows.iter().flatten().copied().collect()
                }
                // an empty matrix parses as an empty vector
                (TensorData::Vector(v), 2) if v.is_empty() && view.is_empty() => Vec::new(),
                _ => return Err(bad(format!("tensor {name} has the wrong shape"))),
            };
            if flat.len() != view.len() {
                return Err(bad(format!("tensor {name} has {} values, expected {}", flat.len(), view.len())));
            }
            view.iter_mut().zip(flat).for_each(|(dst, src)| *dst = src);
        }
        if ck.params.len() != expected {
            return Err(bad(format!("checkpoint has {} tensors, expected {expected}", ck.params.len())));
        }
        Ok(ModelState { dims: ck.dims, seed: ck.seed, params })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(&ck)
    }
}
