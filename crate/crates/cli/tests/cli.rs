use std::path::Path;
use std::process::Command;

use hydroformer::model::{Checkpoint, TransformerModel};
use hydroformer_cli::commands::{cmd_datagen, cmd_evaluate, cmd_explain, cmd_predict, cmd_train, ExplainRequest};
use hydroformer_cli::config::{EstimatorKind, RESOLVED_CONFIG};
use hydroformer_cli::{CliError, RunConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hydroformer"));
    c.env("RUST_LOG", "error");
    c
}

fn quick(out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        seed: 2,
        out: out.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.data.synth_length = 500;
    cfg.train.max_epochs = 1;
    cfg.shap.permutations = 4;
    cfg.shap.sample = 3;
    cfg
}

#[test]
fn datagen_is_deterministic_and_guards_length() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let a = cmd_datagen(&cfg, 450, &dir.path().join("a.csv")).unwrap();
    let b = cmd_datagen(&cfg, 450, &dir.path().join("b.csv")).unwrap();
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(b).unwrap());
    assert_eq!(text.lines().count(), 451);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 20);
    assert!(matches!(cmd_datagen(&cfg, 100, &dir.path().join("c.csv")), Err(CliError::Config(_))));
}

#[test]
fn train_evaluate_predict_explain() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    let t = cmd_train(&cfg).unwrap();
    for f in ["model.hyfc", "model.hyfc.sha256", "loss_curve.csv", RESOLVED_CONFIG] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let digest_line = std::fs::read_to_string(dir.path().join("model.hyfc.sha256")).unwrap();
    assert!(digest_line.starts_with(&t.digest));

    let eval = cmd_evaluate(&cfg, &t.checkpoint).unwrap();
    assert_eq!(eval.report.leads.iter().map(|m| m.lead).collect::<Vec<_>>(), vec![1, 3, 5, 7]);
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let f = cmd_predict(&cfg, &t.checkpoint, None).unwrap();
    assert_eq!(f.values.len(), 7);

    let out = cmd_explain(&cfg, &t.checkpoint, &ExplainRequest { instance: None, global: true }).unwrap();
    let g = out.global.unwrap();
    assert!((g.percent.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    let beeswarm = std::fs::read_to_string(dir.path().join("beeswarm.csv")).unwrap();
    assert_eq!(beeswarm.lines().count(), 1 + 3 * 19);

    cfg.shap.estimator = EstimatorKind::Exact;
    match cmd_explain(&cfg, &t.checkpoint, &ExplainRequest { instance: None, global: true }) {
        Err(CliError::Config(msg)) => assert!(msg.contains("--exact-cap"), "{msg}"),
        other => panic!("expected a cap error, got {other:?}"),
    }

    cfg.eval.leads = vec![8];
    assert!(matches!(cmd_evaluate(&cfg, &t.checkpoint), Err(CliError::Config(_))));
}

#[test]
fn malformed_checkpoint_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let path = dir.path().join("bad.hyfc");
    std::fs::write(&path, b"HYFC\x09\x00\x00\x00").unwrap();
    assert!(matches!(cmd_evaluate(&cfg, &path), Err(CliError::Data(_))));

    // A valid checkpoint without normalization statistics cannot be scored.
    let m = TransformerModel::new(cfg.model_config(&hydroformer::data::FeatureSchema::lake()), 0).unwrap();
    Checkpoint::from_model(&m, None).save(&path).unwrap();
    assert!(matches!(cmd_evaluate(&cfg, &path), Err(CliError::Data(_))));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nepochs = 3\n").unwrap();
    let s = bin().args(["--config", bad.to_str().unwrap(), "train"]).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&s.stderr).contains("epochs"));

    let s = bin().args(["--out", dir.path().to_str().unwrap(), "datagen", "--length", "100"]).output().unwrap();
    assert_eq!(s.status.code(), Some(2));

    let s = bin()
        .args(["--out", dir.path().to_str().unwrap(), "evaluate", "--checkpoint", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(3));

    let csv = dir.path().join("d.csv");
    let s = bin()
        .args(["--out", dir.path().to_str().unwrap(), "--seed", "9", "datagen", "--length", "400", "--output"])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0));
    let echoed = RunConfig::load(&dir.path().join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(echoed.seed, 9);
}

#[test]
fn bench_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let s = bin()
        .args(["--out", dir.path().to_str().unwrap(), "bench", "--lengths", "12", "--ks", "L", "--repeats", "2"])
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0));
    let table = String::from_utf8(s.stdout).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",pass")));
}
