//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            4 bytes  "HYFC"
//! format version   u32
//! header length    u64
//! header           UTF-8 JSON: format_version, config, normalizer,
//!                  metadata, tensors [{name, shape}]
//! payload          f64 LE values of every tensor, in header order
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ParamStore, TransformerModel};
use crate::data::Normalizer;
use crate::tensor::{Float, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HYFC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    normalizer: Option<Normalizer>,
    metadata: BTreeMap<String, String>,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub normalizer: Option<Normalizer>,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn from_model(model: &TransformerModel, normalizer: Option<Normalizer>) -> Self {
        Self {
            config: model.config().clone(),
            params: model.params().clone(),
            normalizer,
            metadata: BTreeMap::new(),
        }
    }

    pub fn into_model(self) -> Result<(TransformerModel, Option<Normalizer>), ModelError> {
        let model = TransformerModel::from_params(self.config, self.params)?;
        Ok((model, self.normalizer))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            normalizer: self.normalizer.clone(),
            metadata: self.metadata.clone(),
            tensors: self
                .params
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + self.params.total_elements() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in self.params.iter() {
            for &v in t.data() {
                out.extend_from_slice(&(v as f64).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |msg: &str| ModelError::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| ModelError::Checkpoint(format!("malformed header: {e}")))?;
        if header.format_version != version {
            return Err(bad("header version disagrees with preamble"));
        }
        let mut params = ParamStore::new();
        let mut cursor = header_end;
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let end = cursor
                .checked_add(n * 8)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| ModelError::Checkpoint(format!("payload truncated at {}", entry.name)))?;
            let data = bytes[cursor..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")) as Float)
                .collect();
            cursor = end;
            let t = Tensor::new(entry.shape, data).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
            params.insert(entry.name, t);
        }
        if cursor != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self {
            config: header.config,
            params,
            normalizer: header.normalizer,
            metadata: header.metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
