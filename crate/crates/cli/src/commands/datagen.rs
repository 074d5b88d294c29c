use std::path::{Path, PathBuf};

use hydroformer::data::{synth_generate, FeatureSchema, SYNTH_MIN_ROWS};

use crate::config::RunConfig;
use crate::error::CliError;

/// Writes `length` synthetic days to `output`.
pub fn cmd_datagen(cfg: &RunConfig, length: usize, output: &Path) -> Result<PathBuf, CliError> {
    if length < SYNTH_MIN_ROWS {
        return Err(CliError::Config(format!(
            "length {length} is below the generator minimum of {SYNTH_MIN_ROWS} days"
        )));
    }
    cfg.echo_into(&cfg.out)?;
    let schema = FeatureSchema::lake();
    let series = synth_generate(cfg.synth_seed(), length, &schema);
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    series.save_csv(output)?;
    log::info!("wrote {length} days to {}", output.display());
    Ok(output.to_path_buf())
}
