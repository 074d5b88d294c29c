use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::{Normalizer, Split, WindowedDataset, DATE_FORMAT};
use crate::metrics::{LeadMetrics, MetricReport, R2Mode};
use crate::model::Forecaster;
use crate::tensor::Float;

/// Denormalized actual and predicted target at one lead, keyed by the date
/// being predicted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    pub lead: usize,
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub split: Split,
    pub report: MetricReport,
    pub series: Vec<PredictionSeries>,
}

impl Evaluation {
    /// `lead,date,actual,predicted`
    pub fn write_series_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lead,date,actual,predicted")?;
        for s in &self.series {
            for ((d, a), p) in s.dates.iter().zip(&s.actual).zip(&s.predicted) {
                writeln!(w, "{},{},{},{}", s.lead, d.format(DATE_FORMAT), a, p)?;
            }
        }
        Ok(())
    }

    pub fn save_series_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_series_csv(&mut w)?;
        w.flush()
    }
}

/// Free-running evaluation: one rollout per sample to the longest requested
/// lead, scored on denormalized values.
pub fn evaluate_split(
    model: &dyn Forecaster,
    data: &WindowedDataset,
    normalizer: &Normalizer,
    split: Split,
    leads: &[usize],
    mode: R2Mode,
) -> Result<Evaluation, TrainError> {
    let horizon = model.horizon();
    if let Some(&lead) = leads.iter().find(|&&l| l == 0 || l > horizon) {
        return Err(TrainError::LeadTooLong { lead, horizon });
    }
    let samples = data.split(split);
    if samples.is_empty() {
        return Err(TrainError::EmptySplit(split));
    }
    let steps = leads.iter().copied().max().unwrap_or(1);
    let forecasts: Vec<Vec<Float>> = samples
        .par_iter()
        .map(|s| model.forecast(&s.window, steps))
        .collect::<Result<_, _>>()?;

    let target = data.target_index;
    let mut report = MetricReport::default();
    let mut series = Vec::with_capacity(leads.len());
    for &lead in leads {
        let mut dates = Vec::with_capacity(samples.len());
        let mut actual = Vec::with_capacity(samples.len());
        let mut predicted = Vec::with_capacity(samples.len());
        for (s, f) in samples.iter().zip(&forecasts) {
            dates.push(s.anchor_date + Days::new(lead as u64));
            actual.push(normalizer.denormalize(target, s.targets[lead - 1] as f64));
            predicted.push(normalizer.denormalize(target, f[lead - 1] as f64));
        }
        report.leads.push(LeadMetrics::compute(lead, &actual, &predicted, mode)?);
        series.push(PredictionSeries {
            lead,
            dates,
            actual,
            predicted,
        });
    }
    Ok(Evaluation { split, report, series })
}
