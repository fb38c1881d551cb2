//! Binary parameter checkpoints.
//!
//! Layout: an 8-byte little-endian header length, a UTF-8 JSON header, then
//! every tensor as consecutive little-endian `f32` values. Offsets in the
//! header count `f32` elements from the start of the data block.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Parameters;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    /// Caller-defined settings stored alongside the weights.
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(params: &Parameters, metadata: &serde_json::Value) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut data = Vec::new();
    let mut offset = 0;
    for t in params.tensors() {
        tensors.push(TensorEntry {
            name: t.name,
            shape: t.shape,
            offset,
        });
        offset += t.data.len();
        for &x in t.data {
            data.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let header = Header {
        version: CHECKPOINT_VERSION,
        config: params.config.clone(),
        metadata: metadata.clone(),
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + data.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&data);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Parameters, serde_json::Value)> {
    let bad = |m: String| Error::Checkpoint(m);
    if bytes.len() < 8 {
        return Err(bad("file too short for a header".into()));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let json = bytes
        .get(8..8usize.saturating_add(header_len))
        .ok_or_else(|| bad(format!("header length {header_len} exceeds file size")))?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| bad(format!("malformed header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    let data = &bytes[8 + header_len..];
    if data.len() % 4 != 0 {
        return Err(bad("data block is not a whole number of f32 values".into()));
    }
    let mut params = Parameters::zeros(&header.config).map_err(|e| bad(e.to_string()))?;
    let expected = params.tensors().len();
    if header.tensors.len() != expected {
        return Err(bad(format!(
            "{} tensors in header, config implies {expected}",
            header.tensors.len()
        )));
    }
    for (t, entry) in params.tensors_mut().into_iter().zip(&header.tensors) {
        if t.name != entry.name || t.shape != entry.shape {
            return Err(bad(format!(
                "tensor {} {:?} does not match expected {} {:?}",
                entry.name, entry.shape, t.name, t.shape
            )));
        }
        let start = entry.offset * 4;
        let end = start + t.data.len() * 4;
        let raw = data
            .get(start..end)
            .ok_or_else(|| bad(format!("tensor {} runs past the data block", entry.name)))?;
        for (x, chunk) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *x = f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
        }
    }
    if !params.all_finite() {
        return Err(bad("non-finite parameter values".into()));
    }
    Ok((params, header.metadata))
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &Parameters, metadata: &serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params, metadata)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Parameters, serde_json::Value)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
