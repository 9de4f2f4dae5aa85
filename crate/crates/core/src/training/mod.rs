//! Training loop with early stopping on validation AUROC, batch prediction,
//! and evaluation metrics.

pub mod metrics;

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Split};
use crate::embeddings::EmbeddingTable;
use crate::exec::Execution;
use crate::graph_builder::{DocGraph, GraphRecord};
use crate::model::{ModelConfig, ModelError, ModelInput, ModelState, Optimizer, OptimizerKind, Params};

pub use metrics::{
    auprc, auroc, pr_curve, recall_at_precision, write_pr_tsv, MetricError, MetricsReport, PrPoint, RecallAtPrecision,
    RP_TARGET,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss at epoch {epoch} on document {doc_id:?}")]
    NonFiniteLoss { epoch: usize, doc_id: String },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("document {doc_id:?}: {reason}")]
    BadExample { doc_id: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub pos_weight: f64,
    pub patience: usize,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            pos_weight: 1.0,
            patience: 5,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: &str| Err(TrainError::Config(m.to_owned()));
        if self.epochs == 0 {
            return err("epochs must be positive");
        }
        if self.batch_size == 0 {
            return err("batch size must be positive");
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return err("learning rate must be finite and non-negative");
        }
        if !self.pos_weight.is_finite() || self.pos_weight <= 0.0 {
            return err("positive-class weight must be positive");
        }
        if self.patience == 0 {
            return err("patience must be at least 1");
        }
        Ok(())
    }
}

/// A document ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub doc_id: String,
    pub label: u8,
    pub a_norm: Array2<f64>,
    pub x0: Array2<f64>,
    pub tokens: Array2<f64>,
}

impl Example {
    pub fn from_graph(g: &DocGraph, table: &EmbeddingTable) -> Self {
        Example {
            doc_id: g.doc_id.clone(),
            label: g.label,
            a_norm: g.a_norm.clone(),
            x0: g.x0.clone(),
            tokens: table.embed_sequence(&g.tokens),
        }
    }

    pub fn from_record(r: &GraphRecord, table: &EmbeddingTable) -> Result<Self, TrainError> {
        let bad = |reason: String| TrainError::BadExample { doc_id: r.doc_id.clone(), reason };
        if r.feature_dim != table.dim() {
            return Err(bad(format!("graph features have width {}, embeddings {}", r.feature_dim, table.dim())));
        }
        Ok(Example {
            doc_id: r.doc_id.clone(),
            label: r.label,
            a_norm: r.a_norm_matrix().map_err(bad)?,
            x0: r.x0_matrix().map_err(bad)?,
            tokens: table.embed_sequence(&r.tokens),
        })
    }

    pub fn input(&self) -> ModelInput<'_> {
        ModelInput { a_norm: &self.a_norm, x0: &self.x0, tokens: &self.tokens }
    }
}

/// Examples grouped by split, each group in corpus order.
#[derive(Debug, Clone, Default)]
pub struct SplitExamples {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl SplitExamples {
    /// Documents without a split assignment are skipped.
    pub fn from_graphs(corpus: &Corpus, graphs: &[DocGraph], table: &EmbeddingTable) -> Self {
        let mut out = SplitExamples::default();
        for g in graphs {
            if let Some(split) = corpus.split_of(&g.doc_id) {
                out.get_mut(split).push(Example::from_graph(g, table));
            }
        }
        out
    }

    pub fn get(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut Vec<Example> {
        match split {
            Split::Train => &mut self.train,
            Split::Validation => &mut self.validation,
            Split::Test => &mut self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auroc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation AUROC.
    pub best: ModelState,
    pub best_epoch: usize,
    pub best_val_auroc: f64,
    pub log: Vec<EpochLog>,
}

/// Mean loss and gradient over `batch`. Per-document work may run in
/// parallel; the reduction always runs in doc-id order so results do not
/// depend on scheduling.
pub fn batch_gradient(
    state: &ModelState,
    batch: &[&Example],
    pos_weight: f64,
    exec: Execution,
) -> Result<(Vec<f64>, Params), ModelError> {
    let mut sorted: Vec<&Example> = batch.to_vec();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let results = exec.try_map(&sorted, |ex| state.loss_and_gradient(ex.input(), ex.label, pos_weight))?;
    let mut total = state.params.zeros_like();
    let mut losses = Vec::with_capacity(results.len());
    for (loss, g) in &results {
        total.add_scaled(1.0, g);
        losses.push(*loss);
    }
    total.map_inplace(|x| x / results.len().max(1) as f64);
    Ok((losses, total))
}

/// Trains from a freshly initialized model.
pub fn train(
    train_set: &[Example],
    val_set: &[Example],
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let dim = train_set.first().ok_or(TrainError::EmptySplit("train"))?.x0.ncols();
    let state = ModelState::new(dim, model_config)?;
    train_from(state, train_set, val_set, config)
}

pub fn train_from(
    mut state: ModelState,
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let val_labels: Vec<u8> = val_set.iter().map(|e| e.label).collect();
    if !val_labels.contains(&0) || !val_labels.contains(&1) {
        return Err(MetricError::Undefined("validation split needs both classes for AUROC").into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &state.params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(ModelState, usize, f64)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (losses, grad) = batch_gradient(&state, &batch, config.pos_weight, config.execution)?;
            let mut ids: Vec<&str> = batch.iter().map(|e| e.doc_id.as_str()).collect();
            ids.sort_unstable();
            for (loss, id) in losses.iter().zip(ids) {
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, doc_id: id.to_owned() });
                }
                loss_sum += loss;
            }
            if config.learning_rate > 0.0 {
                optimizer.step(&mut state.params, &grad);
            }
        }
        let scores: Vec<f64> =
            predict(&state, val_set, config.execution)?.into_iter().map(|p| p.score).collect();
        let val_auroc = auroc(&scores, &val_labels)?;
        log.push(EpochLog { epoch, train_loss: loss_sum / train_set.len() as f64, val_auroc });
        log::info!("epoch {epoch}: train_loss {:.6} val_auroc {val_auroc:.4}", loss_sum / train_set.len() as f64);

        if best.as_ref().is_none_or(|(_, _, b)| val_auroc > *b) {
            best = Some((state.clone(), epoch, val_auroc));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best, best_epoch, best_val_auroc) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { best, best_epoch, best_val_auroc, log })
}

/// Result of training on one split assignment and scoring its test split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outcome: TrainOutcome,
    pub test_predictions: Vec<Prediction>,
    pub test_metrics: MetricsReport,
}

pub fn fit_and_evaluate(
    data: &SplitExamples,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<Evaluation, TrainError> {
    if data.test.is_empty() {
        return Err(TrainError::EmptySplit("test"));
    }
    let outcome = train(&data.train, &data.validation, model_config, config)?;
    let test_predictions = predict(&outcome.best, &data.test, config.execution)?;
    let test_metrics = evaluate(&test_predictions)?;
    Ok(Evaluation { outcome, test_predictions, test_metrics })
}

/// Appends one JSON object per epoch.
pub fn write_log_jsonl<W: Write>(log: &[EpochLog], mut out: W) -> std::io::Result<()> {
    for entry in log {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub score: f64,
    pub label: u8,
}

/// Positive-class probability per document, in input order.
pub fn predict(state: &ModelState, examples: &[Example], exec: Execution) -> Result<Vec<Prediction>, ModelError> {
    exec.try_map(examples, |ex| {
        Ok(Prediction { doc_id: ex.doc_id.clone(), score: state.score(ex.input())?, label: ex.label })
    })
}

pub fn evaluate(predictions: &[Prediction]) -> Result<MetricsReport, MetricError> {
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let labels: Vec<u8> = predictions.iter().map(|p| p.label).collect();
    MetricsReport::compute(&scores, &labels)
}

/// `doc_id\tscore\tlabel` rows under a header.
pub fn write_predictions_tsv<W: Write>(predictions: &[Prediction], mut out: W) -> std::io::Result<()> {
    writeln!(out, "doc_id\tscore\tlabel")?;
    for p in predictions {
        writeln!(out, "{}\t{}\t{}", p.doc_id, p.score, p.label)?;
    }
    Ok(())
}
