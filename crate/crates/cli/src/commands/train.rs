use std::path::PathBuf;
use std::time::Instant;

use hydroformer::data::{prepare_dataset, FeatureSchema};
use hydroformer::model::{Checkpoint, TransformerModel};
use hydroformer::training::{fit, LossCurve};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{load_series, sha256_hex, write_file, CHECKPOINT_FILE};

pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";

#[derive(Debug)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    /// Hex SHA-256 of the checkpoint bytes.
    pub digest: String,
    pub curve: LossCurve,
}

/// Trains the configured variant and writes the checkpoint, its digest, the
/// loss curve and the resolved configuration into `cfg.out`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let dir = cfg.out.clone();
    cfg.echo_into(&dir)?;
    let schema = FeatureSchema::lake();
    let series = load_series(cfg, &schema)?;
    let (data, normalizer) = prepare_dataset(&series, &schema, cfg.data.lookback, cfg.data.horizon, cfg.fractions())?;
    let mc = cfg.model_config(&schema);
    log::info!(
        "training {} ({} parameters) on {} windows",
        mc.variant_name(),
        mc.parameter_count(),
        data.samples.len()
    );
    let mut model = TransformerModel::new(mc, cfg.seed)?;
    let started = Instant::now();
    let curve = fit(&mut model, &data, &cfg.train_config())?;
    log::info!(
        "best epoch {} of {} in {:.1}s",
        curve.best_epoch,
        curve.epochs.len(),
        started.elapsed().as_secs_f64()
    );

    let mut ckpt = Checkpoint::from_model(&model, Some(normalizer));
    ckpt.metadata.insert("variant".into(), model.config().variant_name().into());
    ckpt.metadata.insert("seed".into(), cfg.seed.to_string());
    ckpt.metadata.insert("best_epoch".into(), curve.best_epoch.to_string());
    let bytes = ckpt.to_bytes();
    let digest = sha256_hex(&bytes);
    let checkpoint = dir.join(CHECKPOINT_FILE);
    write_file(&checkpoint, &bytes)?;
    write_file(&dir.join(format!("{CHECKPOINT_FILE}.sha256")), format!("{digest}  {CHECKPOINT_FILE}\n"))?;
    write_file(&dir.join(LOSS_CURVE_FILE), curve.to_csv())?;
    Ok(TrainOutcome {
        dir,
        checkpoint,
        digest,
        curve,
    })
}
