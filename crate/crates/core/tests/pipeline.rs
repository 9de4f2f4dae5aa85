use std::collections::BTreeMap;

use medtext::corpus::{generate_synthetic, split_corpus, Split};
use medtext::graph_builder::{build_corpus_graphs, read_graph_dir, write_graph_dir};
use medtext::knowledge_graph::link_entities;
use medtext::model::Dims;
use medtext::training::{predict, train, Example, SplitExamples};
use medtext::{Execution, GraphConfig, ModelConfig, ModelState, TrainConfig};

fn tiny_model() -> ModelConfig {
    ModelConfig { gcn_hidden: 8, seq_hidden: 4, seq_out: 4, cls_hidden: 4, seed: 2 }
}

/// Logistic regression on entity counts, trained by full-batch gradient descent.
#[test]
fn bag_of_entities_baseline_separates_synthetic_classes() {
    let data = generate_synthetic(200, 12, 1);
    let corpus = split_corpus(&data.corpus, [0.8, 0.0, 0.2], 1).unwrap();
    let index: BTreeMap<&str, usize> = data.kg.entities().iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    let features = |split: Split| -> Vec<(Vec<f64>, u8)> {
        corpus
            .documents_in(split)
            .map(|doc| {
                let mut x = vec![0.0; index.len() + 1];
                x[index.len()] = 1.0;
                for m in link_entities(doc, &data.kg) {
                    x[index[m.entity_id.as_str()]] += 1.0;
                }
                (x, doc.label)
            })
            .collect()
    };
    let (train_set, test_set) = (features(Split::Train), features(Split::Test));
    let mut w = vec![0.0; index.len() + 1];
    for _ in 0..500 {
        let mut g = vec![0.0; w.len()];
        for (x, y) in &train_set {
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let err = 1.0 / (1.0 + (-z).exp()) - f64::from(*y);
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += err * xi;
            }
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= 0.1 * gi / train_set.len() as f64;
        }
    }
    let correct = test_set
        .iter()
        .filter(|(x, y)| {
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            (z > 0.0) == (*y == 1)
        })
        .count();
    let accuracy = correct as f64 / test_set.len() as f64;
    assert!(accuracy >= 0.9, "baseline accuracy {accuracy}");
}

#[test]
fn serialized_graphs_feed_the_model_like_in_memory_graphs() {
    let data = generate_synthetic(24, 10, 3);
    let corpus = split_corpus(&data.corpus, [0.5, 0.25, 0.25], 3).unwrap();
    let graphs =
        build_corpus_graphs(&corpus, &data.kg, &data.embeddings, &GraphConfig::default(), Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_graph_dir(dir.path(), &graphs, &corpus.split_assignment).unwrap();
    let (manifest, records) = read_graph_dir(dir.path()).unwrap();
    assert_eq!(manifest.documents.len(), graphs.len());
    for (g, r) in graphs.iter().zip(&records) {
        let a = Example::from_graph(g, &data.embeddings);
        let b = Example::from_record(r, &data.embeddings).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn graph_building_is_identical_across_execution_modes() {
    let data = generate_synthetic(40, 12, 4);
    let cfg = GraphConfig::default();
    let seq = build_corpus_graphs(&data.corpus, &data.kg, &data.embeddings, &cfg, Execution::Sequential).unwrap();
    let par = build_corpus_graphs(&data.corpus, &data.kg, &data.embeddings, &cfg, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn checkpoint_reload_reproduces_predictions() {
    let data = generate_synthetic(30, 10, 5);
    let corpus = split_corpus(&data.corpus, [0.6, 0.2, 0.2], 5).unwrap();
    let graphs =
        build_corpus_graphs(&corpus, &data.kg, &data.embeddings, &GraphConfig::default(), Execution::Parallel).unwrap();
    let split = SplitExamples::from_graphs(&corpus, &graphs, &data.embeddings);
    let cfg = TrainConfig { epochs: 3, learning_rate: 1e-2, ..TrainConfig::default() };
    let outcome = train(&split.train, &split.validation, &tiny_model(), &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    outcome.best.save(&path).unwrap();
    let reloaded = ModelState::load(&path).unwrap();
    let before = predict(&outcome.best, &split.test, Execution::Sequential).unwrap();
    let after = predict(&reloaded, &split.test, Execution::Parallel).unwrap();
    assert_eq!(before, after);
    assert_eq!(after.len(), split.test.len());
    assert!(after.iter().all(|p| p.score > 0.0 && p.score < 1.0));

    let zero = ModelState::zeros(Dims { input: data.embeddings.dim(), ..tiny_model().dims(0) });
    zero.save(&path).unwrap();
    let zero = ModelState::load(&path).unwrap();
    assert!(predict(&zero, &split.test, Execution::Parallel).unwrap().iter().all(|p| p.score == 0.5));
}

#[test]
fn all_views_dropped_still_trains() {
    let data = generate_synthetic(30, 10, 6);
    let corpus = split_corpus(&data.corpus, [0.6, 0.2, 0.2], 6).unwrap();
    let cfg = GraphConfig::default().without_views(&[1, 2, 3, 4]);
    let graphs = build_corpus_graphs(&corpus, &data.kg, &data.embeddings, &cfg, Execution::Parallel).unwrap();
    for g in &graphs {
        assert_eq!(g.n_edges(), 0);
        assert_eq!(g.a_norm, ndarray::Array2::<f64>::eye(g.n_vertices()));
    }
    let split = SplitExamples::from_graphs(&corpus, &graphs, &data.embeddings);
    let outcome =
        train(&split.train, &split.validation, &tiny_model(), &TrainConfig { epochs: 2, ..TrainConfig::default() })
            .unwrap();
    assert!(outcome.best.params.all_finite());
}
