use hydroformer::data::DataError;
use hydroformer::model::ModelError;
use hydroformer::shap::ShapError;
use hydroformer::tensor::TensorError;
use hydroformer::training::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Other(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => t.into(),
            ModelError::Checkpoint(_) => CliError::Data(e.to_string()),
            ModelError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Config(_) | TrainError::LeadTooLong { .. } | TrainError::HorizonMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            TrainError::EmptySplit(_) | TrainError::Data(_) => CliError::Data(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Tensor(t) => t.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ShapError> for CliError {
    fn from(e: ShapError) -> Self {
        match e {
            ShapError::TooManyPlayers { .. } | ShapError::TooFewPermutations(_) => CliError::Config(e.to_string()),
            ShapError::NonFinite(_) => CliError::Numeric(e.to_string()),
            ShapError::Model(m) => m.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}
