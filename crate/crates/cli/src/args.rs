use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use medtext::corpus::{DEFAULT_MAX_TOKENS, MIN_DOCS, MIN_ENTITIES};
use medtext::graph_builder::{DEFAULT_GAMMA, DEFAULT_WINDOW};
use medtext::knowledge_graph::DEFAULT_MAX_DEPTH;
use medtext::model::OptimizerKind;
use medtext::{Execution, GraphConfig, ModelConfig, Split, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "medtext", version, about = "Binary document classifier over word and entity graphs")]
pub struct Cli {
    /// Seed for generation, splitting, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Run per-document loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus, knowledge graph and embedding file.
    GenSynth(GenSynthArgs),
    /// Link, build and serialize one graph per document.
    BuildGraph(BuildGraphArgs),
    /// Train on the train split of a graph directory.
    Train(TrainArgs),
    /// Score a split with a checkpoint and write metrics and the PR curve.
    Evaluate(ScoreArgs),
    /// Score a split with a checkpoint and write per-document scores.
    Predict(ScoreArgs),
    /// Retrain with subsets of views removed and tabulate test metrics.
    Ablate(AblateArgs),
    /// Retrain over a range of masking thresholds and tabulate test AUROC.
    SweepGamma(SweepGammaArgs),
    /// Report entity-linking coverage of a corpus.
    LinkStats(LinkStatsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 200, value_parser = at_least(MIN_DOCS))]
    pub docs: usize,
    #[arg(long, default_value_t = 12, value_parser = at_least(MIN_ENTITIES))]
    pub entities: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// JSON-lines corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Knowledge graph JSON.
    #[arg(long)]
    pub kg: PathBuf,
    /// Word-vector text file.
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
    pub max_tokens: usize,
    /// Train, validation and test shares.
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
    pub split: Ratios,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(transparent)]
pub struct Ratios(pub [f64; 3]);

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// View weights, four comma-separated numbers.
    #[arg(long, default_value = "0.25,0.25,0.25,0.25", value_parser = parse_alphas)]
    pub alphas: Alphas,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    /// Keep stopwords as graph vertices.
    #[arg(long)]
    pub keep_stopwords: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(transparent)]
pub struct Alphas(pub [f64; 4]);

impl GraphArgs {
    pub fn config(&self) -> GraphConfig {
        GraphConfig {
            window: self.window,
            alphas: self.alphas.0,
            gamma: self.gamma,
            max_depth: self.max_depth,
            filter_stopwords: !self.keep_stopwords,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BuildGraphArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 128)]
    pub gcn_hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub seq_hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub seq_out: usize,
    #[arg(long, default_value_t = 64)]
    pub cls_hidden: usize,
}

impl ModelArgs {
    pub fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            gcn_hidden: self.gcn_hidden,
            seq_hidden: self.seq_hidden,
            seq_out: self.seq_out,
            cls_hidden: self.cls_hidden,
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "adam")]
    pub optimizer: OptimizerKind,
    /// Loss weight of positive documents.
    #[arg(long, default_value_t = 1.0)]
    pub pos_weight: f64,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
}

impl FitArgs {
    pub fn config(&self, seed: u64, execution: Execution) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            seed,
            optimizer: self.optimizer,
            pos_weight: self.pos_weight,
            patience: self.patience,
            execution,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Output directory of build-graph.
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    /// Views to remove, e.g. `1` or `1,2,3,4`. Repeat for several subsets;
    /// the full model is always included.
    #[arg(long = "drop-views", value_parser = parse_views, required = true)]
    pub drop_views: Vec<Views>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct Views(pub Vec<usize>);

#[derive(Debug, Args, Serialize)]
pub struct SweepGammaArgs {
    #[arg(long, default_value_t = 0.1)]
    pub from: f64,
    #[arg(long, default_value_t = 0.9)]
    pub to: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LinkStatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub kg: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
    pub max_tokens: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn at_least(min: usize) -> impl Fn(&str) -> Result<usize, String> + Clone {
    move |s| {
        let n: usize = s.parse().map_err(|e| format!("{e}"))?;
        if n < min {
            return Err(format!("must be at least {min}"));
        }
        Ok(n)
    }
}

fn parse_list(s: &str, expected: usize) -> Result<Vec<f64>, String> {
    let values = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!("expected {expected} comma-separated numbers, got {}", values.len()));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("values must be finite and non-negative".into());
    }
    Ok(values)
}

#[cfg(test)]
fn default_alphas() -> String {
    medtext::graph_builder::DEFAULT_ALPHAS.map(|a| a.to_string()).join(",")
}

fn parse_alphas(s: &str) -> Result<Alphas, String> {
    let v = parse_list(s, 4)?;
    Ok(Alphas([v[0], v[1], v[2], v[3]]))
}

fn parse_ratios(s: &str) -> Result<Ratios, String> {
    let v = parse_list(s, 3)?;
    Ok(Ratios([v[0], v[1], v[2]]))
}

fn parse_views(s: &str) -> Result<Views, String> {
    let mut views = Vec::new();
    for part in s.split(',') {
        let v: usize = part.trim().parse().map_err(|_| format!("{part:?} is not a view number"))?;
        if !(1..=4).contains(&v) {
            return Err(format!("view {v} does not exist; views are numbered 1 to 4"));
        }
        if !views.contains(&v) {
            views.push(v);
        }
    }
    views.sort_unstable();
    Ok(Views(views))
}
