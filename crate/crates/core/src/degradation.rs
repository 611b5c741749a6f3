//! Linear observation model: a shared `S×S` blur with stride `S` for the
//! spatial path and a row-stochastic band-mixing matrix for the spectral
//! path. Used to simulate observations and as the forward pass of the
//! learnable degradation modules.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cube::HsiCube;
use crate::error::{shape_err, Error, Result};
use crate::scalar::{matmul, MatRef, Scalar};
use crate::tensor::Tensor;

/// Tolerance on the sum-to-one constraints.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// Non-negative `S×S` blur kernel summing to one, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfKernel {
    scale: usize,
    weights: Vec<f64>,
}

impl PsfKernel {
    pub fn new(scale: usize, weights: Vec<f64>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Argument("kernel scale must be positive".into()));
        }
        if weights.len() != scale * scale {
            return Err(shape_err!("{} weights for a {scale}x{scale} kernel", weights.len()));
        }
        check_simplex(&weights, "kernel")?;
        Ok(Self { scale, weights })
    }

    /// Non-negative weights normalized by their grand total.
    pub fn normalized(scale: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data("kernel weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Data("kernel weights sum to zero".into()));
        }
        Self::new(scale, weights.into_iter().map(|v| v / total).collect())
    }

    /// Uniform kernel averaging each disjoint `S×S` block.
    pub fn block_average(scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Argument("scale must be at least 1".into()));
        }
        let n = scale * scale;
        Ok(Self { scale, weights: vec![1.0 / n as f64; n] })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.scale + j]
    }
}

/// Non-negative `l×L` band-mixing matrix whose rows each sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SrfMatrix {
    msi_bands: usize,
    hsi_bands: usize,
    weights: Vec<f64>,
}

impl SrfMatrix {
    pub fn new(msi_bands: usize, hsi_bands: usize, weights: Vec<f64>) -> Result<Self> {
        if msi_bands == 0 || hsi_bands == 0 {
            return Err(Error::Argument("SRF dimensions must be positive".into()));
        }
        if weights.len() != msi_bands * hsi_bands {
            return Err(shape_err!("{} weights for a {msi_bands}x{hsi_bands} SRF", weights.len()));
        }
        for (i, row) in weights.chunks(hsi_bands).enumerate() {
            check_simplex(row, &format!("SRF row {i}"))?;
        }
        Ok(Self { msi_bands, hsi_bands, weights })
    }

    /// Divides each row of raw response values by its sum.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let hsi_bands = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || hsi_bands == 0 {
            return Err(Error::Data("empty SRF".into()));
        }
        let mut weights = Vec::with_capacity(rows.len() * hsi_bands);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != hsi_bands {
                return Err(shape_err!("SRF row {i} has {} entries, expected {hsi_bands}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("SRF row {i} has a non-finite entry")));
            }
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::Data(format!("SRF row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::Data(format!("SRF row {i} sums to zero")));
            }
            weights.extend(row.iter().map(|v| v / sum));
        }
        Self::new(rows.len(), hsi_bands, weights)
    }

    pub fn identity(bands: usize) -> Result<Self> {
        let mut w = vec![0.0; bands * bands];
        (0..bands).for_each(|i| w[i * bands + i] = 1.0);
        Self::new(bands, bands, w)
    }

    pub fn msi_bands(&self) -> usize {
        self.msi_bands
    }

    pub fn hsi_bands(&self) -> usize {
        self.hsi_bands
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.hsi_bands..(i + 1) * self.hsi_bands]
    }
}

fn check_simplex(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Data(format!("{what} has a negative or non-finite weight")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Data(format!("{what} sums to {s}, expected 1")));
    }
    Ok(())
}

/// Each output pixel is the `kernel`-weighted sum of its disjoint `s×s`
/// input block, per channel.
pub fn blur_decimate<T: Scalar>(x: &Tensor<T>, kernel: &[T], s: usize) -> Result<Tensor<T>> {
    check_blur_shape(x, kernel, s)?;
    let (h, w) = (x.rows / s, x.cols / s);
    let mut out = Tensor::zeros(x.channels, h, w);
    for c in 0..x.channels {
        let src = x.channel(c);
        let dst = out.channel_mut(c);
        for i in 0..h {
            for a in 0..s {
                let srow = &src[(i * s + a) * x.cols..(i * s + a + 1) * x.cols];
                let krow = &kernel[a * s..(a + 1) * s];
                for j in 0..w {
                    let block = &srow[j * s..(j + 1) * s];
                    let mut acc = T::zero();
                    for (&kv, &xv) in krow.iter().zip(block) {
                        acc += kv * xv;
                    }
                    dst[i * w + j] += acc;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`blur_decimate`] w.r.t. the input and the kernel.
pub fn blur_decimate_backward<T: Scalar>(
    x: &Tensor<T>,
    kernel: &[T],
    s: usize,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Vec<T>) {
    let (h, w) = (x.rows / s, x.cols / s);
    let mut dx = Tensor::zeros(x.channels, x.rows, x.cols);
    let mut dk = vec![T::zero(); s * s];
    for c in 0..x.channels {
        let src = x.channel(c);
        let g = grad_out.channel(c);
        let dst = dx.channel_mut(c);
        for i in 0..h {
            for a in 0..s {
                let row0 = (i * s + a) * x.cols;
                for j in 0..w {
                    let gv = g[i * w + j];
                    for b in 0..s {
                        let idx = row0 + j * s + b;
                        dst[idx] += kernel[a * s + b] * gv;
                        dk[a * s + b] += src[idx] * gv;
                    }
                }
            }
        }
    }
    (dx, dk)
}

fn check_blur_shape<T: Scalar>(x: &Tensor<T>, kernel: &[T], s: usize) -> Result<()> {
    if s == 0 || kernel.len() != s * s {
        return Err(shape_err!("kernel of {} weights is not {s}x{s}", kernel.len()));
    }
    if !x.rows.is_multiple_of(s) || !x.cols.is_multiple_of(s) {
        return Err(shape_err!(
            "spatial size {}x{} is not divisible by scale {s}",
            x.rows,
            x.cols
        ));
    }
    Ok(())
}

/// Per-pixel spectral mixing `out = R · x` with `R` stored `msi×hsi` row-major.
pub fn band_mix<T: Scalar>(x: &Tensor<T>, srf: &[T], msi_bands: usize) -> Result<Tensor<T>> {
    if msi_bands == 0 || srf.len() != msi_bands * x.channels {
        return Err(shape_err!(
            "SRF with {} weights cannot map {} bands to {msi_bands}",
            srf.len(),
            x.channels
        ));
    }
    let mut out = Tensor::zeros(msi_bands, x.rows, x.cols);
    matmul(
        MatRef::new(srf, msi_bands, x.channels),
        MatRef::new(&x.data, x.channels, x.pixels()),
        &mut out.data,
        false,
    );
    Ok(out)
}

/// Gradients of [`band_mix`] w.r.t. the input and the mixing matrix.
pub fn band_mix_backward<T: Scalar>(
    x: &Tensor<T>,
    srf: &[T],
    msi_bands: usize,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Vec<T>) {
    let p = x.pixels();
    let mut dx = Tensor::zeros(x.channels, x.rows, x.cols);
    let dy = MatRef::new(&grad_out.data, msi_bands, p);
    matmul(MatRef::new(srf, msi_bands, x.channels).t(), dy, &mut dx.data, false);
    let mut dr = vec![T::zero(); srf.len()];
    matmul(dy, MatRef::new(&x.data, x.channels, p).t(), &mut dr, false);
    (dx, dr)
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Blurs and decimates a cube by the kernel's scale.
pub fn spatial_degrade(x: &HsiCube, k: &PsfKernel) -> Result<HsiCube> {
    let t: Tensor<f32> = x.to_tensor();
    let out = blur_decimate(&t, &to_f32(k.weights()), k.scale())?;
    carry_meta(x, HsiCube::from_tensor(&out)?)
}

/// Mixes the bands of every pixel through the SRF.
pub fn spectral_degrade(x: &HsiCube, r: &SrfMatrix) -> Result<HsiCube> {
    if r.hsi_bands() != x.bands() {
        return Err(shape_err!("SRF expects {} bands, cube has {}", r.hsi_bands(), x.bands()));
    }
    let t: Tensor<f32> = x.to_tensor();
    let out = band_mix(&t, &to_f32(r.weights()), r.msi_bands())?;
    HsiCube::from_tensor(&out).map(|c| c.with_name(x.name()))
}

fn carry_meta(src: &HsiCube, out: HsiCube) -> Result<HsiCube> {
    let out = out.with_name(src.name());
    match src.wavelengths_nm() {
        Some(wl) => out.with_wavelengths(wl.to_vec()),
        None => Ok(out),
    }
}

/// Adds white Gaussian noise scaled so that `10·log10(Σx² / Σn²)` equals
/// `snr_db` in expectation. No clamping.
pub fn add_white_noise<T: Scalar, R: Rng + ?Sized>(x: &Tensor<T>, snr_db: f64, rng: &mut R) -> Tensor<T> {
    let power: f64 = x.data.iter().map(|v| v.to_f64().map_or(f64::NAN, |f| f * f)).sum::<f64>() / x.data.len() as f64;
    let sigma = libm::sqrt(power / libm::pow(10.0, snr_db / 10.0));
    let data = x
        .data
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(&mut *rng);
            v + T::from_f64_lossy(sigma * n)
        })
        .collect();
    x.with_data(data)
}

/// Produces the (LrHSI, HrMSI) pair observed from a reference cube.
/// Noise, when requested, uses the stream seeded by `noise_seed`; outputs
/// are clamped to `[0, 1]`.
pub fn simulate_pair(
    x: &HsiCube,
    k: &PsfKernel,
    r: &SrfMatrix,
    noise_snr_db: Option<f64>,
    noise_seed: u64,
) -> Result<(HsiCube, HsiCube)> {
    let y = spatial_degrade(x, k)?;
    let z = spectral_degrade(x, r)?;
    match noise_snr_db {
        None => Ok((y, z)),
        Some(snr) => {
            if !snr.is_finite() {
                return Err(Error::Argument("noise SNR must be finite".into()));
            }
            let mut rng = crate::seeds::stream_rng(noise_seed, crate::seeds::NOISE);
            let yn = add_white_noise(&y.to_tensor::<f32>(), snr, &mut rng);
            let zn = add_white_noise(&z.to_tensor::<f32>(), snr, &mut rng);
            Ok((
                carry_meta(&y, HsiCube::from_tensor(&yn)?)?,
                HsiCube::from_tensor(&zn)?.with_name(z.name()),
            ))
        }
    }
}
