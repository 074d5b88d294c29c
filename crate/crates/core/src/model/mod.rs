//! Encoder-decoder Transformer regressor with linear or nonlinear output head.

mod checkpoint;
mod config;
mod params;
mod positional;
mod transformer;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{AttentionMode, ModelConfig, OutputHead};
pub use params::{BoundParams, ParamId, ParamStore};
pub use positional::PositionalEncoding;
pub use transformer::{TransformerModel, LAYER_NORM_EPS};

use crate::tensor::{Float, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("sequence length {len} exceeds positional table length {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that turns a normalized input window into a multi-step forecast
/// in normalized target space.
pub trait Forecaster: Sync {
    fn horizon(&self) -> usize;

    fn forecast(&self, window: &Tensor, steps: usize) -> Result<Vec<Float>, ModelError>;
}

impl Forecaster for TransformerModel {
    fn horizon(&self) -> usize {
        self.config().horizon
    }

    fn forecast(&self, window: &Tensor, steps: usize) -> Result<Vec<Float>, ModelError> {
        self.predict(window, steps)
    }
}
