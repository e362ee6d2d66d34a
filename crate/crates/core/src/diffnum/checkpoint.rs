//! Binary checkpoint encoding.
//!
//! Layout: the 8-byte magic `MTSSCKPT`, a little-endian `u64` manifest
//! length, the manifest as UTF-8 JSON, then every tensor's values as
//! little-endian `f64` in manifest order. Manifest offsets are byte offsets
//! from the start of the value section.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DiffError, ParamStore, Shape, Tensor};

pub const MAGIC: &[u8; 8] = b"MTSSCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub model_kind: String,
    /// Hash of `meta`, see [`config_hash`].
    pub config_hash: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

/// Short hex digest of a JSON value. Object keys serialize in sorted order,
/// so equal values hash equally.
pub fn config_hash(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    hex_prefix(&Sha256::digest(&bytes), 8)
}

pub(crate) fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes.iter().take(n).map(|b| format!("{b:02x}")).collect()
}

fn err(msg: impl Into<String>) -> DiffError {
    DiffError::Checkpoint(msg.into())
}

pub fn encode_checkpoint(
    store: &ParamStore,
    model_kind: &str,
    meta: serde_json::Value,
) -> Result<Vec<u8>, DiffError> {
    let mut tensors = Vec::with_capacity(store.len());
    let mut offset = 0u64;
    for (_, name, t) in store.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().dims().to_vec(),
            offset,
        });
        offset += 8 * t.len() as u64;
    }
    let manifest = CheckpointManifest {
        version: FORMAT_VERSION,
        model_kind: model_kind.to_string(),
        config_hash: config_hash(&meta),
        meta,
        tensors,
    };
    let header = serde_json::to_vec(&manifest).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, _, t) in store.iter() {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ParamStore, CheckpointManifest), DiffError> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(err("not a checkpoint (bad magic)"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| err("truncated manifest"))?;
    let manifest: CheckpointManifest =
        serde_json::from_slice(&bytes[16..header_end]).map_err(|e| err(e.to_string()))?;
    if manifest.version != FORMAT_VERSION {
        return Err(err(format!("unsupported version {}", manifest.version)));
    }
    if manifest.config_hash != config_hash(&manifest.meta) {
        return Err(err("config hash does not match manifest metadata"));
    }
    let data = &bytes[header_end..];
    let mut store = ParamStore::new();
    for entry in &manifest.tensors {
        let shape = Shape::new(entry.shape.clone())?;
        let start = entry.offset as usize;
        let end = start + 8 * shape.numel();
        if end > data.len() {
            return Err(err(format!("tensor {} runs past end of file", entry.name)));
        }
        let values = data[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        store.add(&entry.name, Tensor::new(shape, values)?)?;
    }
    Ok((store, manifest))
}
