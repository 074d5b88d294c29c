use std::fmt::Write as _;
use std::path::Path;

use hydroformer::data::{FeatureSchema, Split};
use hydroformer::training::{evaluate_split, Evaluation};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{dataset_for, load_trained, write_file};

/// Scores the checkpoint on the test split at `cfg.eval.leads` and writes
/// `metrics.json`, `metrics.csv` and `predictions.csv`.
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<Evaluation, CliError> {
    let trained = load_trained(checkpoint)?;
    let horizon = trained.model.config().horizon;
    if let Some(l) = cfg.eval.leads.iter().find(|&&l| l == 0 || l > horizon) {
        return Err(CliError::Config(format!("lead {l} exceeds the trained horizon of {horizon}")));
    }
    cfg.echo_into(&cfg.out)?;
    let schema = FeatureSchema::lake();
    let data = dataset_for(cfg, &trained, &schema)?;
    let eval = evaluate_split(
        &trained.model,
        &data,
        &trained.normalizer,
        Split::Test,
        &cfg.eval.leads,
        cfg.eval.r2_mode,
    )?;
    let mut table = String::from("lead,n,r2_mode,r2,mae,rmse,mbe\n");
    for m in &eval.report.leads {
        let _ = writeln!(table, "{},{},{},{},{},{},{}", m.lead, m.n, m.r2_mode, m.r2, m.mae, m.rmse, m.mbe);
        log::info!("lead {}: R² {:.4} MAE {:.4} RMSE {:.4} MBE {:.4}", m.lead, m.r2, m.mae, m.rmse, m.mbe);
    }
    write_file(&cfg.out.join("metrics.json"), eval.report.to_json())?;
    write_file(&cfg.out.join("metrics.csv"), table)?;
    eval.save_series_csv(cfg.out.join("predictions.csv"))?;
    Ok(eval)
}
