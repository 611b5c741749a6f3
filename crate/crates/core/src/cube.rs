//! Hyperspectral / multispectral data cubes.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A radiance cube laid out band-major `(band, row, col)` with every value
/// in `[0, 1]`. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    bands: usize,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    wavelengths_nm: Option<Vec<f64>>,
    name: String,
}

impl HsiCube {
    /// Builds a cube, rejecting non-finite or out-of-range values.
    pub fn new(bands: usize, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(bands, rows, cols, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(alloc::format!("non-finite value at index {i}")));
        }
        if let Some(i) = data.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Data(alloc::format!(
                "value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self { bands, rows, cols, data, wavelengths_nm: None, name: String::new() })
    }

    /// Builds a cube after clamping every value into `[0, 1]`. Non-finite
    /// values are still rejected.
    pub fn from_clamped(bands: usize, rows: usize, cols: usize, mut data: Vec<f32>) -> Result<Self> {
        check_dims(bands, rows, cols, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(alloc::format!("non-finite value at index {i}")));
        }
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(Self { bands, rows, cols, data, wavelengths_nm: None, name: String::new() })
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let data = t.data.iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
        Self::from_clamped(t.channels, t.rows, t.cols, data)
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            channels: self.bands,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| T::from_f64_lossy(v as f64)).collect(),
        }
    }

    pub fn with_wavelengths(mut self, wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.len() != self.bands {
            return Err(shape_err!(
                "{} wavelengths for {} bands",
                wavelengths_nm.len(),
                self.bands
            ));
        }
        if wavelengths_nm.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Data("wavelengths must be strictly increasing".into()));
        }
        self.wavelengths_nm = Some(wavelengths_nm);
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.bands, self.rows, self.cols)
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn wavelengths_nm(&self) -> Option<&[f64]> {
        self.wavelengths_nm.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn band(&self, b: usize) -> Result<&[f32]> {
        if b >= self.bands {
            return Err(Error::Index { index: b, len: self.bands });
        }
        let n = self.pixels();
        Ok(&self.data[b * n..(b + 1) * n])
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.rows + row) * self.cols + col]
    }

    /// Spectrum of one pixel, `bands` long.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f32> {
        (0..self.bands).map(|b| self.get(b, row, col)).collect()
    }
}

fn check_dims(bands: usize, rows: usize, cols: usize, len: usize) -> Result<()> {
    if bands == 0 || rows == 0 || cols == 0 {
        return Err(shape_err!("cube dimensions must be positive, got {bands}x{rows}x{cols}"));
    }
    if len != bands * rows * cols {
        return Err(shape_err!("{len} values for a {bands}x{rows}x{cols} cube"));
    }
    Ok(())
}
