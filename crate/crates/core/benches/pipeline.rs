//! Sequential versus rayon execution of the three data-parallel stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use medtext::corpus::generate_synthetic;
use medtext::graph_builder::build_corpus_graphs;
use medtext::training::{batch_gradient, predict, Example};
use medtext::{Execution, GraphConfig, ModelConfig, ModelState};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn stages(c: &mut Criterion) {
    let data = generate_synthetic(128, 12, 7);
    let config = GraphConfig::default();
    let graphs =
        build_corpus_graphs(&data.corpus, &data.kg, &data.embeddings, &config, Execution::Sequential).unwrap();
    let examples: Vec<Example> = graphs.iter().map(|g| Example::from_graph(g, &data.embeddings)).collect();
    let model = ModelConfig { gcn_hidden: 64, seq_hidden: 32, seq_out: 32, cls_hidden: 32, seed: 7 };
    let state = ModelState::new(data.embeddings.dim(), &model).unwrap();
    let batch: Vec<&Example> = examples.iter().take(32).collect();

    let mut group = c.benchmark_group("graph_building");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_corpus_graphs(&data.corpus, &data.kg, &data.embeddings, &config, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("batch_gradient");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| batch_gradient(&state, black_box(&batch), 1.0, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("prediction");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| predict(&state, black_box(&examples), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = stages
}
criterion_main!(benches);
