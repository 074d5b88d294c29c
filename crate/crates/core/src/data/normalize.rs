use serde::{Deserialize, Serialize};

use super::DataError;

/// Per-column z-score statistics (population standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits on `rows`, which must be the training rows only.
    pub fn fit(rows: &[Vec<f64>], columns: &[String]) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::InsufficientRows { rows: 0, needed: 1 });
        }
        let n = rows.len() as f64;
        let ncol = columns.len();
        let mut mean = vec![0.0; ncol];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; ncol];
        for row in rows {
            for c in 0..ncol {
                let d = row[c] - mean[c];
                var[c] += d * d;
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        for (c, s) in std.iter().enumerate() {
            if *s <= 0.0 || !s.is_finite() {
                return Err(DataError::ConstantFeature {
                    column: columns[c].clone(),
                });
            }
        }
        Ok(Self {
            columns: columns.to_vec(),
            mean,
            std,
        })
    }

    pub fn normalize(&self, col: usize, value: f64) -> f64 {
        (value - self.mean[col]) / self.std[col]
    }

    pub fn denormalize(&self, col: usize, z: f64) -> f64 {
        z * self.std[col] + self.mean[col]
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().enumerate().map(|(c, &v)| self.normalize(c, v)).collect())
            .collect()
    }

    pub fn invert(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().enumerate().map(|(c, &z)| self.denormalize(c, z)).collect())
            .collect()
    }
}
