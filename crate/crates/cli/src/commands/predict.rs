use std::fmt::Write as _;
use std::path::Path;

use chrono::{Days, NaiveDate};
use hydroformer::data::{fill_missing, FeatureSchema, DATE_FORMAT};
use hydroformer::model::Forecaster;
use hydroformer::tensor::Tensor;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{load_series, load_trained, write_file};

#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    /// Last observed day of the input window.
    pub anchor: NaiveDate,
    pub dates: Vec<NaiveDate>,
    /// Denormalized target values, one per step.
    pub values: Vec<f64>,
}

/// Forecasts the full horizon from the window ending at `anchor` (default:
/// the last day of the data) and writes `forecast.csv`.
pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path, anchor: Option<NaiveDate>) -> Result<Forecast, CliError> {
    let trained = load_trained(checkpoint)?;
    cfg.echo_into(&cfg.out)?;
    let schema = FeatureSchema::lake();
    let (filled, _) = fill_missing(&load_series(cfg, &schema)?)?;
    let mc = trained.model.config();
    let end = match anchor {
        None => filled.dates.len() - 1,
        Some(d) => filled
            .dates
            .iter()
            .position(|&x| x == d)
            .ok_or_else(|| CliError::Data(format!("anchor date {d} is not in the data")))?,
    };
    if end + 1 < mc.lookback {
        return Err(CliError::Data(format!(
            "anchor {} leaves fewer than {} days of history",
            filled.dates[end], mc.lookback
        )));
    }
    let rows = trained.normalizer.apply(&filled.to_matrix()?[end + 1 - mc.lookback..=end]);
    let ncol = rows[0].len();
    let window = Tensor::matrix(mc.lookback, ncol, rows.into_iter().flatten().map(|v| v as _).collect())?;
    let steps = mc.horizon;
    let out = trained.model.forecast(&window, steps)?;
    let target = mc.target_index;
    let anchor = filled.dates[end];
    let forecast = Forecast {
        anchor,
        dates: (1..=steps).map(|s| anchor + Days::new(s as u64)).collect(),
        values: out.iter().map(|&z| trained.normalizer.denormalize(target, z as f64)).collect(),
    };
    let mut table = String::from("step,date,predicted\n");
    for (s, (d, v)) in forecast.dates.iter().zip(&forecast.values).enumerate() {
        let _ = writeln!(table, "{},{},{}", s + 1, d.format(DATE_FORMAT), v);
    }
    write_file(&cfg.out.join("forecast.csv"), table)?;
    Ok(forecast)
}
