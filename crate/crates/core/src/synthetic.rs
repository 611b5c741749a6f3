//! Synthetic scenes and response functions for tests and demos.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cube::HsiCube;
use crate::degradation::SrfMatrix;
use crate::error::{Error, Result};
use crate::seeds;

/// Background plus `blobs` isotropic Gaussian blobs, each with its own
/// random spectrum, rescaled into `[0.02, 0.98]`.
pub fn gaussian_blob_scene(bands: usize, rows: usize, cols: usize, blobs: usize, seed: u64) -> Result<HsiCube> {
    if bands == 0 || rows == 0 || cols == 0 {
        return Err(Error::Argument("scene dimensions must be positive".into()));
    }
    let mut rng = seeds::stream_rng(seed, seeds::SCENE);
    let spectrum = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..bands).map(|_| rng.random::<f64>()).collect();
        // Light smoothing along wavelength keeps spectra plausible.
        (0..bands)
            .map(|b| {
                let lo = raw[b.saturating_sub(1)];
                let hi = raw[(b + 1).min(bands - 1)];
                0.25 * lo + 0.5 * raw[b] + 0.25 * hi
            })
            .collect()
    };
    let background = spectrum(&mut rng);
    let size = rows.min(cols) as f64;
    let mut data = vec![0.0f64; bands * rows * cols];
    for b in 0..bands {
        data[b * rows * cols..(b + 1) * rows * cols].iter_mut().for_each(|v| *v = 0.3 * background[b]);
    }
    for _ in 0..blobs {
        let cy = rng.random::<f64>() * rows as f64;
        let cx = rng.random::<f64>() * cols as f64;
        let sigma = size * (0.05 + 0.15 * rng.random::<f64>());
        let amp = 0.5 + rng.random::<f64>();
        let spec = spectrum(&mut rng);
        for r in 0..rows {
            for c in 0..cols {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                let d2 = dy * dy + dx * dx;
                let g = amp * libm::exp(-d2 / (2.0 * sigma * sigma));
                for (b, s) in spec.iter().enumerate() {
                    data[(b * rows + r) * cols + c] += g * s;
                }
            }
        }
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let out = data.iter().map(|&v| (0.02 + 0.96 * (v - lo) / span) as f32).collect();
    HsiCube::new(bands, rows, cols, out)
}

/// `msi_bands` Gaussian response curves evenly spread over `hsi_bands`,
/// each normalized to sum to one.
pub fn gaussian_srf(msi_bands: usize, hsi_bands: usize) -> Result<SrfMatrix> {
    if msi_bands == 0 || hsi_bands == 0 {
        return Err(Error::Argument("SRF dimensions must be positive".into()));
    }
    let width = hsi_bands as f64 / (2.0 * msi_bands as f64);
    let rows: Vec<Vec<f64>> = (0..msi_bands)
        .map(|i| {
            let center = (i as f64 + 0.5) * hsi_bands as f64 / msi_bands as f64 - 0.5;
            (0..hsi_bands)
                .map(|b| {
                    let d = b as f64 - center;
                    libm::exp(-d * d / (2.0 * width * width))
                })
                .collect()
        })
        .collect();
    SrfMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_is_interior_and_deterministic() {
        let a = gaussian_blob_scene(4, 16, 16, 5, 1).unwrap();
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a, gaussian_blob_scene(4, 16, 16, 5, 1).unwrap());
        assert_ne!(a, gaussian_blob_scene(4, 16, 16, 5, 2).unwrap());
    }

    #[test]
    fn srf_rows_peak_at_centers() {
        let r = gaussian_srf(4, 16).unwrap();
        let argmax = |row: &[f64]| row.iter().enumerate().fold(0, |m, (i, &v)| if v > row[m] { i } else { m });
        assert_eq!(argmax(r.row(0)), 1);
        assert_eq!(argmax(r.row(3)), 13);
    }
}
