//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes            | content                                   |
//! |------------------|-------------------------------------------|
//! | 0..8             | magic `CASCKPT\0`                         |
//! | 8..12            | `u32` format version (currently 1)        |
//! | 12..20           | `u64` header length `h` in bytes          |
//! | 20..20+h         | UTF-8 JSON header                         |
//! | 20+h..           | `f32` tensor data, concatenated           |
//!
//! The header holds `config`, free-form `metadata`, an `architecture`
//! description and a `tensors` list of `{name, shape, offset}` where
//! `offset` counts `f32` elements from the start of the data section.

use std::fs;
use std::path::Path;

use cascade_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::model::Transformer;
use crate::params::ModelParams;

pub const MAGIC: &[u8; 8] = b"CASCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub norm: String,
    pub positional: String,
    pub activation: String,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            norm: "pre-layernorm".into(),
            positional: "learned-absolute".into(),
            activation: "relu".into(),
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    architecture: Architecture,
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// A model plus free-form training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Transformer,
    pub metadata: serde_json::Value,
}

pub fn to_bytes(model: &Transformer, metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let names = ModelParams::<()>::names(model.config.n_layers);
    let refs = model.params.refs();
    let mut offset = 0;
    let tensors = names
        .into_iter()
        .zip(&refs)
        .map(|(name, t)| {
            let entry = TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            };
            offset += t.len();
            entry
        })
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        architecture: Architecture::default(),
        metadata: metadata.clone(),
        tensors,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + json.len() + offset * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in refs {
        for &x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |msg: &str| ModelError::Checkpoint(msg.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let h = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let data_start = 20usize
        .checked_add(h)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[20..data_start])?;
    let data = &bytes[data_start..];
    if data.len() % 4 != 0 {
        return Err(bad("data section is not a whole number of f32 values"));
    }
    let floats: Vec<f32> = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let expected = ModelParams::<()>::names(header.config.n_layers);
    if header.tensors.len() != expected.len() {
        return Err(bad("tensor count does not match config"));
    }
    let mut tensors = Vec::with_capacity(expected.len());
    for (entry, name) in header.tensors.iter().zip(&expected) {
        if &entry.name != name {
            return Err(ModelError::Checkpoint(format!(
                "expected tensor {name}, found {}",
                entry.name
            )));
        }
        let len: usize = entry.shape.iter().product();
        let slice = floats
            .get(entry.offset..entry.offset + len)
            .ok_or_else(|| bad("tensor extends past end of data"))?;
        tensors.push(Tensor::new(entry.shape.clone(), slice.to_vec())?);
    }
    let params = ModelParams::from_vec(header.config.n_layers, tensors)
        .ok_or_else(|| bad("tensor layout does not match config"))?;
    let model = Transformer::from_params(header.config, params)?;
    Ok(Checkpoint {
        model,
        metadata: header.metadata,
    })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &Transformer,
    metadata: &serde_json::Value,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, to_bytes(model, metadata)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    from_bytes(&fs::read(path)?)
}
