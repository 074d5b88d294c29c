//! Regression skill scores: coefficient of determination in two forms, mean
//! absolute error, root mean squared error and mean bias error.
//!
//! Every function takes observations `y` first and predictions `yhat` second.
//! Bias is `mean(y − ŷ)`: positive means the predictions run low.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("observation and prediction lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("degenerate R² denominator in {0} mode")]
    DegenerateDenominator(R2Mode),
    #[error("non-finite input")]
    NonFinite,
}

/// Which deviations form the R² denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R2Mode {
    /// `1 − Σ(ŷ−y)² / Σ(ŷ−ȳ)²`, ȳ the observed mean.
    Paper,
    /// `1 − Σ(y−ŷ)² / Σ(y−ȳ)²`.
    Standard,
}

impl fmt::Display for R2Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            R2Mode::Paper => "paper",
            R2Mode::Standard => "standard",
        })
    }
}

impl FromStr for R2Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(R2Mode::Paper),
            "standard" => Ok(R2Mode::Standard),
            other => Err(format!("unknown R² mode `{other}` (expected paper or standard)")),
        }
    }
}

fn check(y: &[f64], yhat: &[f64], needed: usize) -> Result<(), MetricError> {
    if y.len() != yhat.len() {
        return Err(MetricError::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < needed {
        return Err(MetricError::TooFew { needed, got: y.len() });
    }
    if y.iter().chain(yhat).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn r2(y: &[f64], yhat: &[f64], mode: R2Mode) -> Result<f64, MetricError> {
    check(y, yhat, 2)?;
    let ybar = mean(y);
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    let denom: f64 = match mode {
        R2Mode::Paper => yhat.iter().map(|p| (p - ybar).powi(2)).sum(),
        R2Mode::Standard => y.iter().map(|a| (a - ybar).powi(2)).sum(),
    };
    if denom == 0.0 {
        return Err(MetricError::DegenerateDenominator(mode));
    }
    Ok(1.0 - sse / denom)
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    Ok((y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt())
}

pub fn mbe(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64)
}

/// Scores at one lead time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadMetrics {
    pub lead: usize,
    pub n: usize,
    pub r2_mode: R2Mode,
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub mbe: f64,
}

impl LeadMetrics {
    pub fn compute(lead: usize, y: &[f64], yhat: &[f64], mode: R2Mode) -> Result<Self, MetricError> {
        Ok(Self {
            lead,
            n: y.len(),
            r2_mode: mode,
            r2: r2(y, yhat, mode)?,
            mae: mae(y, yhat)?,
            rmse: rmse(y, yhat)?,
            mbe: mbe(y, yhat)?,
        })
    }
}

/// Per-lead scores, one entry per requested lead in request order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub leads: Vec<LeadMetrics>,
}

impl MetricReport {
    pub fn lead(&self, lead: usize) -> Option<&LeadMetrics> {
        self.leads.iter().find(|m| m.lead == lead)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
