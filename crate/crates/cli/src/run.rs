//! Helpers shared by the subcommands.

use std::path::{Path, PathBuf};

use hydroformer::data::{load_table, prepare_dataset_with, synth_generate, FeatureSchema, Normalizer, RawSeries, WindowedDataset};
use hydroformer::model::{Checkpoint, TransformerModel};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CHECKPOINT_FILE: &str = "model.hyfc";

/// The configured data file, or the synthetic series when none is set.
pub fn load_series(cfg: &RunConfig, schema: &FeatureSchema) -> Result<RawSeries, CliError> {
    match &cfg.data.path {
        Some(path) => Ok(load_table(path, schema).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?),
        None => {
            let seed = cfg.synth_seed();
            log::info!("generating {} synthetic days with seed {seed}", cfg.data.synth_length);
            Ok(synth_generate(seed, cfg.data.synth_length, schema))
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn default_checkpoint(cfg: &RunConfig) -> PathBuf {
    cfg.out.join(CHECKPOINT_FILE)
}

/// A trained model with the normalization it was trained under.
pub struct Trained {
    pub model: TransformerModel,
    pub normalizer: Normalizer,
    pub digest: String,
}

pub fn load_trained(path: &Path) -> Result<Trained, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let (model, normalizer) = Checkpoint::from_bytes(&bytes)?.into_model()?;
    let normalizer =
        normalizer.ok_or_else(|| CliError::Data(format!("checkpoint {} carries no normalization statistics", path.display())))?;
    Ok(Trained {
        model,
        normalizer,
        digest,
    })
}

/// Windows the configured data with the checkpoint's lookback, horizon and
/// normalization.
pub fn dataset_for(cfg: &RunConfig, trained: &Trained, schema: &FeatureSchema) -> Result<WindowedDataset, CliError> {
    let series = load_series(cfg, schema)?;
    let mc = trained.model.config();
    Ok(prepare_dataset_with(
        &series,
        schema,
        mc.lookback,
        mc.horizon,
        cfg.fractions(),
        &trained.normalizer,
    )?)
}
