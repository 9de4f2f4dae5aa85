use std::path::Path;
use std::process::{Command, Output};

fn medtext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medtext")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = medtext(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = medtext(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "error is not one line: {err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_MODEL: [&str; 8] = ["--gcn-hidden", "8", "--seq-hidden", "4", "--seq-out", "4", "--cls-hidden", "4"];

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen-synth", "--docs", "60", "--entities", "10", "--seed", "1", "--out", p(&data)]);
    for f in ["corpus.jsonl", "kg.json", "embeddings.txt", "run_config.json"] {
        assert!(data.join(f).is_file(), "missing {f}");
    }
    let again = tmp.path().join("again");
    ok(&["gen-synth", "--docs", "60", "--entities", "10", "--seed", "1", "--out", p(&again)]);
    for f in ["corpus.jsonl", "kg.json", "embeddings.txt"] {
        assert_eq!(std::fs::read(data.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap());
    }

    let (corpus, kg, emb) = (data.join("corpus.jsonl"), data.join("kg.json"), data.join("embeddings.txt"));
    let inputs = ["--corpus", p(&corpus), "--kg", p(&kg), "--emb", p(&emb)];
    let graphs = tmp.path().join("graphs");
    let mut args = vec!["build-graph", "--seed", "1", "--out", p(&graphs)];
    args.extend(inputs);
    let stdout = ok(&args);
    assert!(stdout.contains("graphs 60"), "{stdout}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(graphs.join("manifest.json")).unwrap()).unwrap();
    let docs = manifest["documents"].as_array().unwrap();
    assert_eq!(docs.len(), 60);
    let n_test = docs.iter().filter(|d| d["split"] == "test").count();
    let run_config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(graphs.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(run_config["graph"]["gamma"], 0.5);
    assert_eq!(run_config["graph"]["window"], 3);

    let v1_only = tmp.path().join("v1");
    let mut args = vec!["build-graph", "--alphas", "1,0,0,0", "--out", p(&v1_only)];
    args.extend(inputs);
    ok(&args);

    let model_dir = tmp.path().join("model");
    let mut args = vec!["train", "--seed", "1", "--graphs", p(&graphs), "--emb", p(&emb), "--epochs", "3", "--out", p(&model_dir)];
    args.extend(SMALL_MODEL);
    ok(&args);
    let checkpoint = model_dir.join("model.json");
    assert!(checkpoint.is_file());
    let log = std::fs::read_to_string(model_dir.join("train_log.jsonl")).unwrap();
    assert!((1..=3).contains(&log.lines().count()));

    let eval_dir = tmp.path().join("eval");
    ok(&["evaluate", "--graphs", p(&graphs), "--emb", p(&emb), "--checkpoint", p(&checkpoint), "--out", p(&eval_dir)]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("metrics.json")).unwrap()).unwrap();
    for key in ["auroc", "auprc", "rp80"] {
        assert!(metrics[key].is_number(), "metrics lack {key}");
    }
    assert!(std::fs::read_to_string(eval_dir.join("pr_curve.tsv")).unwrap().starts_with("recall\tprecision"));
    assert!(eval_dir.join("run_config.json").is_file());

    let pred_dir = tmp.path().join("pred");
    ok(&["predict", "--graphs", p(&graphs), "--emb", p(&emb), "--checkpoint", p(&checkpoint), "--out", p(&pred_dir)]);
    let rows = std::fs::read_to_string(pred_dir.join("predictions.tsv")).unwrap();
    assert_eq!(rows.lines().count(), n_test + 1);

    let missing = tmp.path().join("nope.json");
    let err = fails(&["evaluate", "--graphs", p(&graphs), "--emb", p(&emb), "--checkpoint", p(&missing), "--out", p(&eval_dir)]);
    assert!(err.contains("file not found"), "{err}");

    let stats_dir = tmp.path().join("stats");
    ok(&["link-stats", "--corpus", p(&corpus), "--kg", p(&kg), "--out", p(&stats_dir)]);
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stats_dir.join("link_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["zero_mention_share"], 0.0);
    assert_eq!(stats["n_docs"], 60);
}

#[test]
fn experiment_drivers() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen-synth", "--docs", "40", "--entities", "10", "--seed", "2", "--out", p(&data)]);
    let (corpus, kg, emb) = (data.join("corpus.jsonl"), data.join("kg.json"), data.join("embeddings.txt"));
    let mut common = vec!["--corpus", p(&corpus), "--kg", p(&kg), "--emb", p(&emb), "--epochs", "2", "--split", "0.6,0.2,0.2"];
    common.extend(SMALL_MODEL);

    let ablate = tmp.path().join("ablate");
    let mut args = vec!["ablate", "--drop-views", "1", "--drop-views", "1,2,3,4", "--out", p(&ablate)];
    args.extend(&common);
    ok(&args);
    let table = std::fs::read_to_string(ablate.join("ablation.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("full\t"));
    assert!(rows[2].starts_with("w/o V1\t"));
    assert!(rows[3].starts_with("w/o V1,V2,V3,V4\t0,0,0,0\t"));

    let sweep = tmp.path().join("sweep");
    let mut args = vec!["sweep-gamma", "--from", "0.1", "--to", "0.9", "--step", "0.4", "--out", p(&sweep)];
    args.extend(&common);
    ok(&args);
    let first = std::fs::read_to_string(sweep.join("gamma_sweep.tsv")).unwrap();
    assert_eq!(first.lines().count(), 4);
    assert!(first.lines().nth(2).unwrap().starts_with("0.5\t"));
    ok(&args);
    assert_eq!(std::fs::read_to_string(sweep.join("gamma_sweep.tsv")).unwrap(), first);
}

#[test]
fn invalid_flags_fail_on_one_line_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fails(&["gen-synth", "--docs", "5", "--out", p(&out)]);
    let data = tmp.path().join("data");
    ok(&["gen-synth", "--docs", "20", "--entities", "8", "--out", p(&data)]);
    let (corpus, kg, emb) = (data.join("corpus.jsonl"), data.join("kg.json"), data.join("embeddings.txt"));
    let inputs = ["--corpus", p(&corpus), "--kg", p(&kg), "--emb", p(&emb)];

    let mut args = vec!["build-graph", "--alphas", "1,x,0,0", "--out", p(&out)];
    args.extend(inputs);
    fails(&args);
    let mut args = vec!["ablate", "--drop-views", "5", "--out", p(&out)];
    args.extend(inputs);
    fails(&args);
    let mut args = vec!["sweep-gamma", "--step", "0", "--out", p(&out)];
    args.extend(inputs);
    fails(&args);
    let mut args = vec!["build-graph", "--window", "1", "--out", p(&out)];
    args.extend(inputs);
    fails(&args);
    assert!(!out.exists(), "a failed command created its output directory");
}
