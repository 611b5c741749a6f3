//! Band-wise bicubic upsampling of the LrHSI, used as a reference point.

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::nn::BicubicUpsampler;
use crate::tensor::Tensor;

pub fn bicubic_upsample(y: &HsiCube, factor: usize) -> Result<HsiCube> {
    if factor == 0 {
        return Err(Error::Argument("upsampling factor must be positive".into()));
    }
    let t: Tensor<f32> = y.to_tensor();
    let up = BicubicUpsampler::new(y.rows(), y.cols(), factor).forward(&t);
    let out = HsiCube::from_tensor(&up)?.with_name("bicubic");
    match y.wavelengths_nm() {
        Some(wl) => out.with_wavelengths(wl.to_vec()),
        None => Ok(out),
    }
}
