//! Network: two-layer GCN over the document graph, attentive readout to
//! `D_G`, bidirectional LSTM branch to `D_T`, MLP classifier on their
//! concatenation, cross-entropy loss. Forward passes return a trace that the
//! hand-written backward pass consumes.

mod checkpoint;
pub mod classifier;
pub mod gcn;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod readout;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use classifier::{classify, cross_entropy, softmax, ClassifierTrace};
pub use gcn::{gcn_forward, GcnTrace};
pub use lstm::{seq_forward, SeqTrace};
pub use optim::{AdamConfig, Optimizer, OptimizerKind};
pub use params::{ClassifierParams, Dims, GcnParams, LstmCellParams, Params, ReadoutParams, SeqEncoderParams};
pub use readout::{readout_forward, ReadoutTrace};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("trace does not belong to this model: {0}")]
    TraceMismatch(String),
    #[error("invalid dimensions {0:?}")]
    InvalidDims(Dims),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

/// Hidden widths and initialization seed; the input width comes from the
/// embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gcn_hidden: usize,
    pub seq_hidden: usize,
    pub seq_out: usize,
    pub cls_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { gcn_hidden: 128, seq_hidden: 128, seq_out: 128, cls_hidden: 64, seed: 0 }
    }
}

impl ModelConfig {
    pub fn dims(&self, input: usize) -> Dims {
        Dims {
            input,
            gcn_hidden: self.gcn_hidden,
            seq_hidden: self.seq_hidden,
            seq_out: self.seq_out,
            cls_hidden: self.cls_hidden,
        }
    }
}

/// One document as the network sees it.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    /// Renormalized adjacency, `n × n`.
    pub a_norm: &'a Array2<f64>,
    /// Initial vertex features, `n × d`.
    pub x0: &'a Array2<f64>,
    /// Token vectors for the sequence branch, `T × d`.
    pub tokens: &'a Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub gcn: GcnTrace,
    pub readout: ReadoutTrace,
    pub seq: SeqTrace,
    pub classifier: ClassifierTrace,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> &Array1<f64> {
        &self.classifier.probabilities
    }

    /// Probability of the positive class.
    pub fn score(&self) -> f64 {
        self.classifier.probabilities[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub dims: Dims,
    pub seed: u64,
    pub params: Params,
}

impl ModelState {
    pub fn new(input_dim: usize, config: &ModelConfig) -> Result<Self, ModelError> {
        let dims = config.dims(input_dim);
        if !dims.is_valid() {
            return Err(ModelError::InvalidDims(dims));
        }
        Ok(ModelState { dims, seed: config.seed, params: Params::init(dims, config.seed) })
    }

    pub fn zeros(dims: Dims) -> Self {
        ModelState { dims, seed: 0, params: Params::zeros(dims) }
    }

    fn check_input(&self, input: &ModelInput<'_>) -> Result<(), ModelError> {
        let n = input.x0.nrows();
        if n == 0 {
            return Err(ModelError::Empty("graph has no vertices"));
        }
        if input.tokens.nrows() == 0 {
            return Err(ModelError::Empty("token sequence is empty"));
        }
        if input.a_norm.dim() != (n, n) {
            return Err(ModelError::Shape(format!("adjacency {:?} for {n} vertices", input.a_norm.dim())));
        }
        for (what, m) in [("vertex features", input.x0), ("token vectors", input.tokens)] {
            if m.ncols() != self.dims.input {
                return Err(ModelError::Shape(format!("{what} have width {}, model expects {}", m.ncols(), self.dims.input)));
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: ModelInput<'_>) -> Result<ForwardTrace, ModelError> {
        self.check_input(&input)?;
        let p = &self.params;
        let gcn = gcn_forward(input.a_norm, input.x0, &p.gcn);
        let readout = readout_forward(&gcn.x2, &p.readout);
        let seq = seq_forward(input.tokens, &p.seq);
        let classifier = classify(&readout.d_g, &seq.d_t, &p.classifier);
        Ok(ForwardTrace { gcn, readout, seq, classifier })
    }

    pub fn score(&self, input: ModelInput<'_>) -> Result<f64, ModelError> {
        Ok(self.forward(input)?.score())
    }

    /// Class-weighted loss: `weight * cross_entropy`, with `weight =
    /// pos_weight` for label 1 and 1 otherwise.
    pub fn weighted_loss(trace: &ForwardTrace, label: u8, pos_weight: f64) -> f64 {
        let w = if label == 1 { pos_weight } else { 1.0 };
        w * cross_entropy(trace.probabilities(), label)
    }

    /// Exact gradients of the weighted loss for every parameter tensor.
    pub fn backward(
        &self,
        input: ModelInput<'_>,
        trace: &ForwardTrace,
        label: u8,
        pos_weight: f64,
    ) -> Result<Params, ModelError> {
        self.check_input(&input)?;
        let n = input.x0.nrows();
        if trace.gcn.x2.dim() != (n, self.dims.gcn_hidden)
            || trace.seq.top.nrows() != input.tokens.nrows()
            || trace.seq.d_t.len() != self.dims.seq_out
            || trace.classifier.input.len() != self.dims.gcn_hidden + self.dims.seq_out
        {
            return Err(ModelError::TraceMismatch("activation shapes differ from the model dimensions".into()));
        }
        let p = &self.params;
        let mut grad = p.zeros_like();
        let weight = if label == 1 { pos_weight } else { 1.0 };
        let d_logits = classifier::cross_entropy_logit_grad(trace.probabilities(), label, weight);
        let d_concat = classifier::classifier_backward(&trace.classifier, &p.classifier, &d_logits, &mut grad.classifier);
        let h = self.dims.gcn_hidden;
        let d_dg = d_concat.slice(ndarray::s![..h]).to_owned();
        let d_dt = d_concat.slice(ndarray::s![h..]).to_owned();
        let d_x2 = readout::readout_backward(&trace.gcn.x2, &trace.readout, &p.readout, &d_dg, &mut grad.readout);
        gcn::gcn_backward(input.a_norm, &trace.gcn, &p.gcn, &d_x2, &mut grad.gcn);
        lstm::seq_backward(&trace.seq, &p.seq, &d_dt, &mut grad.seq);
        Ok(grad)
    }

    pub fn loss_and_gradient(
        &self,
        input: ModelInput<'_>,
        label: u8,
        pos_weight: f64,
    ) -> Result<(f64, Params), ModelError> {
        let trace = self.forward(input)?;
        let loss = Self::weighted_loss(&trace, label, pos_weight);
        let grad = self.backward(input, &trace, label, pos_weight)?;
        Ok((loss, grad))
    }
}
