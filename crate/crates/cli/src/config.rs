//! Run configuration: one TOML file with `model`, `train`, `data`, `eval`
//! and `shap` sections. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use hydroformer::data::{FeatureSchema, SplitFractions};
use hydroformer::metrics::R2Mode;
use hydroformer::model::{AttentionMode, ModelConfig, OutputHead};
use hydroformer::shap::{Method, DEFAULT_EXACT_CAP};
use hydroformer::tensor::Activation;
use hydroformer::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// File name of the resolved configuration written into every run directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds model initialization, shuffling, synthetic data and SHAP sampling.
    pub seed: u64,
    pub out: PathBuf,
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub eval: EvalSection,
    pub shap: ShapSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("runs/default"),
            model: ModelSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
            eval: EvalSection::default(),
            shap: ShapSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    Nonlinear,
}

/// Architecture. The variant is the pair (`attention_mode`, `output_head`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub d_ffn: usize,
    pub attention_mode: AttentionKind,
    /// Kept scores per row; absent means ⌈key length / 4⌉.
    pub k: Option<usize>,
    pub output_head: HeadKind,
    pub activation: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        let desk = ModelConfig::desk();
        Self {
            d_model: desk.d_model,
            n_heads: desk.n_heads,
            n_encoder_layers: desk.n_encoder_layers,
            n_decoder_layers: desk.n_decoder_layers,
            d_ffn: desk.d_ffn,
            attention_mode: AttentionKind::Sparse,
            k: None,
            output_head: HeadKind::Nonlinear,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub min_delta: f64,
    pub shuffle: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate as f64,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            min_delta: t.min_delta as f64,
            shuffle: t.shuffle_train,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Daily table to read; absent means generate synthetic data.
    pub path: Option<PathBuf>,
    /// Defaults to the run seed.
    pub synth_seed: Option<u64>,
    pub synth_length: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let f = SplitFractions::default();
        Self {
            path: None,
            synth_seed: None,
            synth_length: 2000,
            lookback: 30,
            horizon: 7,
            train_fraction: f.train,
            val_fraction: f.val,
            test_fraction: f.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub leads: Vec<usize>,
    pub r2_mode: R2Mode,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            leads: vec![1, 3, 5, 7],
            r2_mode: R2Mode::Standard,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapSection {
    pub estimator: EstimatorKind,
    pub permutations: usize,
    /// Largest feature count exact enumeration accepts.
    pub exact_cap: usize,
    /// Lead whose denormalized prediction is explained.
    pub lead: usize,
    /// Test instances in a global explanation, spaced evenly over the split.
    pub sample: usize,
}

impl Default for ShapSection {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::Sampled,
            permutations: 128,
            exact_cap: DEFAULT_EXACT_CAP,
            lead: 1,
            sample: 64,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.data.train_fraction,
            val: self.data.val_fraction,
            test: self.data.test_fraction,
        }
    }

    pub fn synth_seed(&self) -> u64 {
        self.data.synth_seed.unwrap_or(self.seed)
    }

    pub fn model_config(&self, schema: &FeatureSchema) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            d_model: m.d_model,
            n_heads: m.n_heads,
            n_encoder_layers: m.n_encoder_layers,
            n_decoder_layers: m.n_decoder_layers,
            d_ffn: m.d_ffn,
            attention: match m.attention_mode {
                AttentionKind::Dense => AttentionMode::Dense,
                AttentionKind::Sparse => AttentionMode::Sparse { k: m.k },
            },
            output_head: match m.output_head {
                HeadKind::Linear => OutputHead::Linear,
                HeadKind::Nonlinear => OutputHead::Nonlinear {
                    activation: m.activation,
                },
            },
            n_features: schema.len(),
            target_index: schema.target_index(),
            lookback: self.data.lookback,
            horizon: self.data.horizon,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate as _,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            min_delta: t.min_delta as _,
            seed: self.seed,
            shuffle_train: t.shuffle,
        }
    }

    pub fn shap_method(&self) -> Method {
        match self.shap.estimator {
            EstimatorKind::Exact => Method::Exact {
                cap: self.shap.exact_cap,
            },
            EstimatorKind::Sampled => Method::Sampled {
                permutations: self.shap.permutations,
                seed: self.seed,
            },
        }
    }

    /// Checks every cross-field constraint the sections impose.
    pub fn validate(&self) -> Result<(), CliError> {
        let schema = FeatureSchema::lake();
        self.model_config(&schema)
            .validate()
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        self.train_config()
            .validate()
            .map_err(|e| CliError::Config(format!("train: {e}")))?;
        if self.model.k.is_some() && self.model.attention_mode == AttentionKind::Dense {
            return Err(CliError::Config("model.k is only meaningful with attention_mode = \"sparse\"".into()));
        }
        let horizon = self.data.horizon;
        if self.eval.leads.is_empty() {
            return Err(CliError::Config("eval.leads must name at least one lead".into()));
        }
        if let Some(l) = self.eval.leads.iter().find(|&&l| l == 0 || l > horizon) {
            return Err(CliError::Config(format!("eval.leads: lead {l} outside 1..={horizon}")));
        }
        if self.shap.lead == 0 || self.shap.lead > horizon {
            return Err(CliError::Config(format!(
                "shap.lead {} outside 1..={horizon}",
                self.shap.lead
            )));
        }
        if self.shap.estimator == EstimatorKind::Sampled && self.shap.permutations < 2 {
            return Err(CliError::Config("shap.permutations must be at least 2".into()));
        }
        if self.shap.sample == 0 {
            return Err(CliError::Config("shap.sample must be at least 1".into()));
        }
        Ok(())
    }

    /// Writes this configuration into `dir` as the run's provenance record.
    pub fn echo_into(&self, dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RESOLVED_CONFIG);
        std::fs::write(&path, self.to_toml())?;
        Ok(path)
    }
}
