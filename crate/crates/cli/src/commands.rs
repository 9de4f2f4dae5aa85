use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use medtext::corpus::{generate_synthetic, load_corpus, split_corpus, Corpus};
use medtext::embeddings::{load_embeddings, EmbeddingTable};
use medtext::graph_builder::{build_corpus_graphs, read_graph_dir, write_graph_dir, GraphRecord};
use medtext::knowledge_graph::{link_stats, load_kg, KnowledgeGraph};
use medtext::training::{
    evaluate, fit_and_evaluate, predict, train, write_log_jsonl, write_pr_tsv, write_predictions_tsv, Example,
    SplitExamples,
};
use medtext::{Execution, GraphConfig, ModelConfig, ModelState, Split, TrainConfig};

use crate::args::*;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

/// Everything a command resolved before running, stored next to its outputs.
#[derive(Debug, Serialize)]
struct RunConfig<'a, A: Serialize> {
    command: &'a str,
    seed: u64,
    execution: Execution,
    args: &'a A,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<TrainConfig>,
}

impl<'a, A: Serialize> RunConfig<'a, A> {
    fn new(command: &'a str, cli: &Cli, args: &'a A) -> Self {
        RunConfig { command, seed: cli.seed, execution: cli.execution(), args, graph: None, model: None, train: None }
    }

    /// Creates `dir` and writes this config into it.
    fn write_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(RUN_CONFIG_FILE), text + "\n")?;
        Ok(())
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("file not found: {}", path.display());
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenSynth(a) => gen_synth(cli, a),
        Command::BuildGraph(a) => build_graph(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Evaluate(a) => score(cli, a, "evaluate"),
        Command::Predict(a) => score(cli, a, "predict"),
        Command::Ablate(a) => ablate(cli, a),
        Command::SweepGamma(a) => sweep_gamma(cli, a),
        Command::LinkStats(a) => link_stats_cmd(cli, a),
    }
}

fn gen_synth(cli: &Cli, a: &GenSynthArgs) -> Result<()> {
    let data = generate_synthetic(a.docs, a.entities, cli.seed);
    RunConfig::new("gen-synth", cli, a).write_into(&a.out)?;
    let paths = data.write_to_dir(&a.out).context("cannot write synthetic data")?;
    let positives = data.corpus.documents.iter().filter(|d| d.label == 1).count();
    println!(
        "documents {} (positive {positives}), entities {}, kg edges {}, embedding words {}",
        data.corpus.len(),
        data.kg.len(),
        data.kg.edges().count(),
        data.embeddings.len()
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

struct Inputs {
    corpus: Corpus,
    kg: KnowledgeGraph,
    table: EmbeddingTable,
}

fn load_inputs(a: &InputArgs, seed: u64) -> Result<Inputs> {
    for p in [&a.corpus, &a.kg, &a.emb] {
        require_file(p)?;
    }
    ensure!(a.max_tokens > 0, "--max-tokens must be positive");
    let corpus = load_corpus(&a.corpus, a.max_tokens).with_context(|| format!("corpus {}", a.corpus.display()))?;
    let corpus = split_corpus(&corpus, a.split.0, seed)?;
    let kg = load_kg(&a.kg).with_context(|| format!("knowledge graph {}", a.kg.display()))?;
    let table = load_embeddings(&a.emb).with_context(|| format!("embeddings {}", a.emb.display()))?;
    Ok(Inputs { corpus, kg, table })
}

fn build_graph(cli: &Cli, a: &BuildGraphArgs) -> Result<()> {
    let config = a.graph.config();
    config.validate()?;
    let inputs = load_inputs(&a.input, cli.seed)?;
    let graphs = build_corpus_graphs(&inputs.corpus, &inputs.kg, &inputs.table, &config, cli.execution())?;
    RunConfig { graph: Some(config), ..RunConfig::new("build-graph", cli, a) }.write_into(&a.out)?;
    let manifest = write_graph_dir(&a.out, &graphs, &inputs.corpus.split_assignment)?;

    let n = graphs.len().max(1) as f64;
    let vertices: usize = graphs.iter().map(|g| g.n_vertices()).sum();
    let edges: usize = graphs.iter().map(|g| g.n_edges()).sum();
    let edgeless = graphs.iter().filter(|g| g.n_edges() == 0).count();
    println!(
        "graphs {}, mean vertices {:.2}, mean edges {:.2}, edgeless {edgeless}",
        manifest.documents.len(),
        vertices as f64 / n,
        edges as f64 / n
    );
    Ok(())
}

/// Loads a graph directory and turns the records of `splits` into examples.
fn load_examples(graphs: &Path, emb: &Path, splits: &[Split]) -> Result<(EmbeddingTable, SplitExamples)> {
    require_file(&graphs.join(medtext::graph_builder::MANIFEST_FILE))?;
    require_file(emb)?;
    let table = load_embeddings(emb).with_context(|| format!("embeddings {}", emb.display()))?;
    let (manifest, records) = read_graph_dir(graphs)?;
    let mut out = SplitExamples::default();
    for (entry, record) in manifest.documents.iter().zip(&records) {
        if let Some(split) = entry.split.filter(|s| splits.contains(s)) {
            out.get_mut(split).push(example(record, &table)?);
        }
    }
    Ok((table, out))
}

fn example(record: &GraphRecord, table: &EmbeddingTable) -> Result<Example> {
    Ok(Example::from_record(record, table)?)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let model_config = a.model.config(cli.seed);
    let train_config = a.fit.config(cli.seed, cli.execution());
    train_config.validate()?;
    let (table, data) = load_examples(&a.graphs, &a.emb, &[Split::Train, Split::Validation])?;
    ensure!(model_config.dims(table.dim()).is_valid(), "model dimensions must be positive");

    RunConfig { model: Some(model_config), train: Some(train_config.clone()), ..RunConfig::new("train", cli, a) }
        .write_into(&a.out)?;
    let outcome = train(&data.train, &data.validation, &model_config, &train_config)?;
    outcome.best.save(a.out.join("model.json"))?;
    let mut log = create(&a.out.join("train_log.jsonl"))?;
    write_log_jsonl(&outcome.log, &mut log)?;
    log.flush()?;
    println!(
        "trained {} epochs on {} documents; best epoch {} with validation AUROC {:.4}",
        outcome.log.len(),
        data.train.len(),
        outcome.best_epoch,
        outcome.best_val_auroc
    );
    Ok(())
}

#[derive(Serialize)]
struct SplitMetrics<'a> {
    split: Split,
    n_documents: usize,
    #[serde(flatten)]
    metrics: &'a medtext::MetricsReport,
}

fn score(cli: &Cli, a: &ScoreArgs, command: &str) -> Result<()> {
    require_file(&a.checkpoint)?;
    let state = ModelState::load(&a.checkpoint).with_context(|| format!("checkpoint {}", a.checkpoint.display()))?;
    let (_, data) = load_examples(&a.graphs, &a.emb, &[a.split])?;
    let examples = data.get(a.split);
    ensure!(!examples.is_empty(), "the {} split is empty", a.split);
    let predictions = predict(&state, examples, cli.execution())?;

    RunConfig::new(command, cli, a).write_into(&a.out)?;
    if command == "predict" {
        let mut out = create(&a.out.join("predictions.tsv"))?;
        write_predictions_tsv(&predictions, &mut out)?;
        out.flush()?;
        println!("scored {} documents", predictions.len());
        return Ok(());
    }
    let report = evaluate(&predictions)?;
    write_json(&a.out.join("metrics.json"), &SplitMetrics { split: a.split, n_documents: predictions.len(), metrics: &report })?;
    let mut pr = create(&a.out.join("pr_curve.tsv"))?;
    write_pr_tsv(&report.pr_points, &mut pr)?;
    pr.flush()?;
    let rp80 = if report.rp80_defined { format!("{:.4}", report.rp80) } else { "undefined".into() };
    println!("{} split: AUROC {:.4}  AUPRC {:.4}  RP80 {rp80}", a.split, report.auroc, report.auprc);
    Ok(())
}

struct Experiment {
    inputs: Inputs,
    model: ModelConfig,
    train: TrainConfig,
    execution: Execution,
}

impl Experiment {
    fn load(cli: &Cli, a: &ExperimentArgs) -> Result<Self> {
        let train = a.fit.config(cli.seed, cli.execution());
        train.validate()?;
        a.graph.config().validate()?;
        let inputs = load_inputs(&a.input, cli.seed)?;
        let model = a.model.config(cli.seed);
        ensure!(model.dims(inputs.table.dim()).is_valid(), "model dimensions must be positive");
        Ok(Experiment { inputs, model, train, execution: cli.execution() })
    }

    fn run(&self, graph: &GraphConfig) -> Result<medtext::MetricsReport> {
        let Inputs { corpus, kg, table } = &self.inputs;
        let graphs = build_corpus_graphs(corpus, kg, table, graph, self.execution)?;
        let data = SplitExamples::from_graphs(corpus, &graphs, table);
        Ok(fit_and_evaluate(&data, &self.model, &self.train)?.test_metrics)
    }

    fn run_config<'a, A: Serialize>(&self, command: &'a str, cli: &Cli, args: &'a A, graph: GraphConfig) -> RunConfig<'a, A> {
        RunConfig { graph: Some(graph), model: Some(self.model), train: Some(self.train.clone()), ..RunConfig::new(command, cli, args) }
    }
}

fn ablate(cli: &Cli, a: &AblateArgs) -> Result<()> {
    let exp = Experiment::load(cli, &a.experiment)?;
    let base = a.experiment.graph.config();
    exp.run_config("ablate", cli, a, base.clone()).write_into(&a.experiment.out)?;

    let mut variants = vec![("full".to_string(), base.clone())];
    for views in &a.drop_views {
        let names: Vec<String> = views.0.iter().map(|v| format!("V{v}")).collect();
        variants.push((format!("w/o {}", names.join(",")), base.without_views(&views.0)));
    }
    let mut out = create(&a.experiment.out.join("ablation.tsv"))?;
    writeln!(out, "variant\talphas\tauroc\tauprc\trp80")?;
    println!("{:<20} {:>8} {:>8} {:>8}", "variant", "AUROC", "AUPRC", "RP80");
    for (name, cfg) in &variants {
        let m = exp.run(cfg)?;
        let alphas = cfg.alphas.map(|x| x.to_string()).join(",");
        writeln!(out, "{name}\t{alphas}\t{}\t{}\t{}", m.auroc, m.auprc, m.rp80)?;
        println!("{name:<20} {:>8.4} {:>8.4} {:>8.4}", m.auroc, m.auprc, m.rp80);
    }
    out.flush()?;
    Ok(())
}

/// `from, from + step, ...` up to `to` inclusive, tolerant of rounding.
pub fn gamma_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    ensure!(from.is_finite() && to.is_finite() && step.is_finite(), "sweep bounds must be finite");
    ensure!(step > 0.0, "--step must be positive");
    ensure!(from <= to, "--from must not exceed --to");
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| ((from + k as f64 * step) * 1e10).round() / 1e10).collect())
}

fn sweep_gamma(cli: &Cli, a: &SweepGammaArgs) -> Result<()> {
    let grid = gamma_grid(a.from, a.to, a.step)?;
    let exp = Experiment::load(cli, &a.experiment)?;
    let base = a.experiment.graph.config();
    exp.run_config("sweep-gamma", cli, a, base.clone()).write_into(&a.experiment.out)?;

    let mut out = create(&a.experiment.out.join("gamma_sweep.tsv"))?;
    writeln!(out, "gamma\tauroc")?;
    for gamma in grid {
        let m = exp.run(&GraphConfig { gamma, ..base.clone() })?;
        writeln!(out, "{gamma}\t{}", m.auroc)?;
        println!("gamma {gamma:<6} AUROC {:.4}", m.auroc);
    }
    out.flush()?;
    Ok(())
}

fn link_stats_cmd(cli: &Cli, a: &LinkStatsArgs) -> Result<()> {
    require_file(&a.corpus)?;
    require_file(&a.kg)?;
    ensure!(a.max_tokens > 0, "--max-tokens must be positive");
    let corpus = load_corpus(&a.corpus, a.max_tokens).with_context(|| format!("corpus {}", a.corpus.display()))?;
    let kg = load_kg(&a.kg).with_context(|| format!("knowledge graph {}", a.kg.display()))?;
    let stats = link_stats(&corpus, &kg);
    RunConfig::new("link-stats", cli, a).write_into(&a.out)?;
    write_json(&a.out.join("link_stats.json"), &stats)?;
    println!(
        "documents {}, mentions {} ({:.2}/doc), distinct entities {:.2}/doc, no mentions {:.1}%, entity coverage {:.1}%",
        stats.n_docs,
        stats.total_mentions,
        stats.mean_mentions_per_doc,
        stats.mean_distinct_entities_per_doc,
        100.0 * stats.zero_mention_share,
        100.0 * stats.entity_coverage
    );
    Ok(())
}
