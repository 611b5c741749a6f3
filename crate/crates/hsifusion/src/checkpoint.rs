//! Parameter checkpoints: an 8-byte magic, a little-endian `u64` manifest
//! length, the JSON manifest, then every parameter tensor as `f32le` in
//! manifest order.

use std::fs;
use std::path::Path;

use hsifusion_core::model::ModelLayout;
use hsifusion_core::{Architecture, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HSIFCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub dtype: String,
    pub hsi_bands: usize,
    pub msi_bands: usize,
    pub scale: usize,
    pub widths: Vec<usize>,
    pub seed: u64,
    pub mode: String,
    pub frozen_degradation: bool,
    pub tensors: Vec<TensorEntry>,
}

impl CheckpointManifest {
    pub fn architecture(&self) -> hsifusion_core::Result<Architecture> {
        Architecture::new(self.hsi_bands, self.msi_bands, self.scale, self.widths.clone())
    }
}

pub fn save_checkpoint(params: &ModelParams<f32>, seed: u64, mode: &str, path: &Path) -> Result<()> {
    let arch = params.arch();
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        dtype: "f32le".into(),
        hsi_bands: arch.hsi_bands,
        msi_bands: arch.msi_bands,
        scale: arch.scale,
        widths: arch.widths.clone(),
        seed,
        mode: mode.into(),
        frozen_degradation: params.frozen_degradation,
        tensors: params
            .layout()
            .segments()
            .iter()
            .map(|s| TensorEntry { name: s.name.clone(), shape: s.shape.clone() })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut bytes = Vec::with_capacity(16 + json.len() + 4 * params.values.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for seg in params.layout().segments() {
        for v in &params.values[seg.range.clone()] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint back into parameters, checking every tensor name and
/// shape against the layout implied by the stored architecture.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointManifest, ModelParams<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::format(path, format!("cannot read checkpoint: {e}")))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let json_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let json_end = 16usize.checked_add(json_len).filter(|&e| e <= bytes.len());
    let json_end = json_end.ok_or_else(|| Error::format(path, "truncated manifest"))?;
    let manifest: CheckpointManifest =
        serde_json::from_slice(&bytes[16..json_end]).map_err(|e| Error::format(path, e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION || manifest.dtype != "f32le" {
        return Err(Error::format(path, "unsupported checkpoint version or dtype"));
    }
    let layout = ModelLayout::new(manifest.architecture()?)?;
    let expected: Vec<TensorEntry> =
        layout.segments().iter().map(|s| TensorEntry { name: s.name.clone(), shape: s.shape.clone() }).collect();
    if expected != manifest.tensors {
        return Err(Error::Integrity { path: path.into(), message: "tensor list does not match the architecture".into() });
    }
    let payload = &bytes[json_end..];
    if payload.len() != 4 * layout.len() {
        return Err(Error::Integrity {
            path: path.into(),
            message: format!("payload has {} bytes, expected {}", payload.len(), 4 * layout.len()),
        });
    }
    let values: Vec<f32> = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let frozen = manifest.frozen_degradation;
    let params = ModelParams::from_values(layout, values, frozen)?;
    Ok((manifest, params))
}
