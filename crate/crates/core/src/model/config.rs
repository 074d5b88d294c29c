use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::attention::default_k;
use crate::tensor::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    Dense,
    /// Top-k sparse attention; `None` resolves k from the key length.
    Sparse { k: Option<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// One affine map d_model → 1.
    Linear,
    /// Affine d_model → d_model, activation, affine d_model → 1.
    Nonlinear { activation: Activation },
}

impl OutputHead {
    pub fn tanh() -> Self {
        OutputHead::Nonlinear {
            activation: Activation::Tanh,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub d_ffn: usize,
    pub attention: AttentionMode,
    pub output_head: OutputHead,
    pub n_features: usize,
    /// Column of the input window that holds the forecast target.
    pub target_index: usize,
    pub lookback: usize,
    pub horizon: usize,
}

impl Default for ModelConfig {
    /// Table-scale architecture: 8 heads, 1 encoder and 2 decoder layers,
    /// FFN width 2048, model width 512, sparse attention and a Tanh head.
    fn default() -> Self {
        Self {
            d_model: 512,
            n_heads: 8,
            n_encoder_layers: 1,
            n_decoder_layers: 2,
            d_ffn: 2048,
            attention: AttentionMode::Sparse { k: None },
            output_head: OutputHead::tanh(),
            n_features: 19,
            target_index: 7,
            lookback: 30,
            horizon: 7,
        }
    }
}

impl ModelConfig {
    /// Small architecture for CPU runs: width 32, 2 heads, FFN width 64.
    pub fn desk() -> Self {
        Self {
            d_model: 32,
            n_heads: 2,
            d_ffn: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_encoder_layers", self.n_encoder_layers),
            ("n_decoder_layers", self.n_decoder_layers),
            ("d_ffn", self.d_ffn),
            ("n_features", self.n_features),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.target_index >= self.n_features {
            return Err(ModelError::Config(format!(
                "target_index {} outside {} features",
                self.target_index, self.n_features
            )));
        }
        if let AttentionMode::Sparse { k: Some(0) } = self.attention {
            return Err(ModelError::Config("sparse k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn max_len(&self) -> usize {
        self.lookback.max(self.horizon)
    }

    /// Sparsity used when attending over `key_len` positions.
    pub fn k_for(&self, key_len: usize) -> Option<usize> {
        match self.attention {
            AttentionMode::Dense => None,
            AttentionMode::Sparse { k } => Some(k.unwrap_or_else(|| default_k(key_len))),
        }
    }

    /// Name of the variant in the dense/sparse × linear/nonlinear grid.
    pub fn variant_name(&self) -> &'static str {
        match (self.attention, self.output_head) {
            (AttentionMode::Dense, OutputHead::Linear) => "Transformer",
            (AttentionMode::Dense, OutputHead::Nonlinear { .. }) => "Transformer-NO",
            (AttentionMode::Sparse { .. }, OutputHead::Linear) => "Transformer-SPA",
            (AttentionMode::Sparse { .. }, OutputHead::Nonlinear { .. }) => "Transformer-EN",
        }
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let d = self.d_model;
        let f = self.d_ffn;
        let attn = 4 * d * d;
        let ffn = d * f + f + f * d + d;
        let ln = 2 * d;
        let embed = (self.n_features * d + d) + (d + d);
        let encoder = self.n_encoder_layers * (attn + ffn + 2 * ln);
        let decoder = self.n_decoder_layers * (2 * attn + ffn + 3 * ln);
        let head = match self.output_head {
            OutputHead::Linear => d + 1,
            OutputHead::Nonlinear { .. } => d * d + d + d + 1,
        };
        embed + encoder + decoder + head
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_table() {
        let c = ModelConfig::default();
        assert_eq!((c.n_heads, c.n_encoder_layers, c.n_decoder_layers), (8, 1, 2));
        assert_eq!((c.d_ffn, c.d_model, c.n_features), (2048, 512, 19));
        c.validate().unwrap();
    }

    #[test]
    fn variant_grid() {
        let mut c = ModelConfig::desk();
        c.attention = AttentionMode::Dense;
        c.output_head = OutputHead::Linear;
        assert_eq!(c.variant_name(), "Transformer");
        c.attention = AttentionMode::Sparse { k: Some(3) };
        c.output_head = OutputHead::tanh();
        assert_eq!(c.variant_name(), "Transformer-EN");
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::desk();
        c.n_heads = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.horizon = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.target_index = 19;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sparse_k_resolution() {
        let mut c = ModelConfig::desk();
        assert_eq!(c.k_for(30), Some(8));
        c.attention = AttentionMode::Sparse { k: Some(5) };
        assert_eq!(c.k_for(30), Some(5));
        c.attention = AttentionMode::Dense;
        assert_eq!(c.k_for(30), None);
    }
}
