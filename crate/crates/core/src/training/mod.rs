//! Adam optimisation of the forecaster with teacher forcing, early stopping
//! on validation loss and free-running evaluation.

mod adam;
mod early_stop;
mod evaluate;
mod fit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use early_stop::{EarlyStopping, StopDecision};
pub use evaluate::{evaluate_split, Evaluation, PredictionSeries};
pub use fit::{fit, fit_with, sample_loss_and_grads, split_loss, EpochLoss, LossCurve};

use crate::data::{DataError, Split};
use crate::metrics::MetricError;
use crate::model::ModelError;
use crate::tensor::{Float, TensorError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: Float,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Validation loss must drop by more than this to count as improvement.
    pub min_delta: Float,
    pub seed: u64,
    pub shuffle_train: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-4,
            max_epochs: 50,
            early_stop_patience: 5,
            min_delta: 0.0,
            seed: 0,
            shuffle_train: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.early_stop_patience == 0 {
            return Err(TrainError::Config(
                "batch_size, max_epochs and early_stop_patience must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(TrainError::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.min_delta >= 0.0) || !self.min_delta.is_finite() {
            return Err(TrainError::Config(format!("min_delta must be finite and non-negative, got {}", self.min_delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{} split has no samples", .0.name())]
    EmptySplit(Split),
    #[error("model horizon {model} does not match dataset horizon {data}")]
    HorizonMismatch { model: usize, data: usize },
    #[error("lead {lead} exceeds model horizon {horizon}")]
    LeadTooLong { lead: usize, horizon: usize },
    #[error("gradient list has {got} entries for {expected} parameters")]
    GradientCount { expected: usize, got: usize },
    #[error("gradient for `{name}` has {got} values, parameter has {expected}")]
    GradientShape { name: String, expected: usize, got: usize },
    #[error("non-finite value at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite { epoch: usize, batch: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
