//! On-disk cube format: a JSON header `<name>.hsc.json` next to a raw
//! payload `<name>.hsc.bin` of little-endian `f32` values in band, row,
//! col order.

use std::fs;
use std::path::{Path, PathBuf};

use hsifusion_core::{Error as CoreError, HsiCube};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DTYPE: &str = "f32le";
pub const LAYOUT: &str = "band-row-col";
pub const HEADER_SUFFIX: &str = ".hsc.json";
pub const PAYLOAD_SUFFIX: &str = ".hsc.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    pub bands: usize,
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelengths_nm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Whether the payload is already scaled to `[0, 1]`. Absent means yes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<bool>,
    pub payload: String,
}

impl CubeHeader {
    pub fn byte_len(&self) -> usize {
        self.bands * self.rows * self.cols * 4
    }
}

/// `foo.hsc.json` / `foo` → `foo.hsc.json`.
pub fn header_path(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    if s.ends_with(HEADER_SUFFIX) {
        path.to_path_buf()
    } else if let Some(stem) = s.strip_suffix(PAYLOAD_SUFFIX) {
        PathBuf::from(format!("{stem}{HEADER_SUFFIX}"))
    } else {
        PathBuf::from(format!("{s}{HEADER_SUFFIX}"))
    }
}

fn stem_of(header: &Path) -> String {
    let file = header.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    file.strip_suffix(HEADER_SUFFIX).unwrap_or(&file).to_string()
}

pub fn read_header(path: &Path) -> Result<CubeHeader> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::format(&hp, format!("cannot read header: {e}")))?;
    let header: CubeHeader = serde_json::from_str(&text).map_err(|e| Error::format(&hp, e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(Error::format(&hp, format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.layout != LAYOUT {
        return Err(Error::format(&hp, format!("unsupported layout {:?}", header.layout)));
    }
    if header.bands == 0 || header.rows == 0 || header.cols == 0 {
        return Err(Error::format(&hp, "dimensions must be positive"));
    }
    Ok(header)
}

/// Loads a cube. Pre-normalized payloads are clamped into `[0, 1]`; others
/// are min-max scaled and the applied range is appended to the name as
/// `[minmax=lo,hi]`.
pub fn load_cube(path: &Path) -> Result<HsiCube> {
    let hp = header_path(path);
    let header = read_header(&hp)?;
    let pp = hp.parent().unwrap_or(Path::new(".")).join(&header.payload);
    let bytes = fs::read(&pp)
        .map_err(|e| Error::Integrity { path: pp.clone(), message: format!("cannot read payload: {e}") })?;
    if bytes.len() != header.byte_len() {
        return Err(Error::Integrity {
            path: pp,
            message: format!(
                "payload has {} bytes, header {}x{}x{} needs {}",
                bytes.len(),
                header.bands,
                header.rows,
                header.cols,
                header.byte_len()
            ),
        });
    }
    let mut data: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(CoreError::Data(format!("non-finite value at index {i} in {}", pp.display())).into());
    }
    let mut name = header.name.clone().unwrap_or_else(|| stem_of(&hp));
    if header.normalized == Some(false) {
        let lo = data.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let span = hi - lo;
        if span > 0.0 {
            data.iter_mut().for_each(|v| *v = (*v - lo) / span);
        } else {
            data.iter_mut().for_each(|v| *v = 0.0);
        }
        name = format!("{name} [minmax={lo},{hi}]");
    }
    let cube = HsiCube::from_clamped(header.bands, header.rows, header.cols, data)?.with_name(name);
    Ok(match header.wavelengths_nm {
        Some(wl) => cube.with_wavelengths(wl)?,
        None => cube,
    })
}

/// Writes `<stem>.hsc.json` and `<stem>.hsc.bin`. Output bytes depend only
/// on the cube.
pub fn save_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    let hp = header_path(path);
    let stem = stem_of(&hp);
    let payload = format!("{stem}{PAYLOAD_SUFFIX}");
    let header = CubeHeader {
        bands: cube.bands(),
        rows: cube.rows(),
        cols: cube.cols(),
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
        wavelengths_nm: cube.wavelengths_nm().map(<[f64]>::to_vec),
        name: (!cube.name().is_empty()).then(|| cube.name().to_string()),
        normalized: Some(true),
        payload: payload.clone(),
    };
    let mut bytes = Vec::with_capacity(header.byte_len());
    for v in cube.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let pp = hp.parent().unwrap_or(Path::new(".")).join(&payload);
    fs::write(&pp, bytes).map_err(|e| Error::io(&pp, e))?;
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    fs::write(&hp, text).map_err(|e| Error::io(&hp, e))
}

/// 8-bit value of a normalized sample, rounding half away from zero.
pub fn to_u8(v: f32) -> u8 {
    (255.0 * v as f64).round().clamp(0.0, 255.0) as u8
}

/// Writes one band as a binary PGM (P5, maxval 255).
pub fn export_band_image(cube: &HsiCube, band: usize, path: &Path) -> Result<()> {
    let data = cube.band(band)?;
    let mut bytes = format!("P5\n{} {}\n255\n", cube.cols(), cube.rows()).into_bytes();
    bytes.extend(data.iter().map(|&v| to_u8(v)));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
