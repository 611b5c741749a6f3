//! Reference-based quality metrics, evaluated on the 8-bit range [0, 255].

use alloc::vec;
use alloc::vec::Vec;

use crate::cube::HsiCube;
use crate::error::{shape_err, Error, Result};

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Spectra (or band means) below this norm are treated as empty.
pub const NORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub sam_deg: f64,
    pub ergas: f64,
    pub ssim: f64,
    pub rmse_per_band: Vec<f64>,
}

fn check_shapes(gt: &HsiCube, est: &HsiCube) -> Result<()> {
    if gt.shape() != est.shape() {
        return Err(shape_err!("ground truth {:?} vs estimate {:?}", gt.shape(), est.shape()));
    }
    Ok(())
}

/// Root-mean-square error of each band in 8-bit units.
pub fn rmse_per_band(gt: &HsiCube, est: &HsiCube) -> Result<Vec<f64>> {
    check_shapes(gt, est)?;
    let n = gt.pixels();
    Ok(gt
        .data()
        .chunks(n)
        .zip(est.data().chunks(n))
        .map(|(g, e)| {
            let sse: f64 = g
                .iter()
                .zip(e)
                .map(|(&a, &b)| {
                    let d = PEAK * a as f64 - PEAK * b as f64;
                    d * d
                })
                .sum();
            libm::sqrt(sse / n as f64)
        })
        .collect())
}

fn psnr_from_rmse(rmse: &[f64]) -> f64 {
    if rmse.contains(&0.0) {
        return f64::INFINITY;
    }
    rmse.iter().map(|&r| 20.0 * libm::log10(PEAK / r)).sum::<f64>() / rmse.len() as f64
}

/// Mean over bands of the per-band PSNR; `+∞` if any band is exact.
pub fn psnr(gt: &HsiCube, est: &HsiCube) -> Result<f64> {
    Ok(psnr_from_rmse(&rmse_per_band(gt, est)?))
}

/// Mean spectral angle in degrees over pixels where both spectra are non-empty.
/// Angles use the half-angle form `2·atan2(‖ĝ−ê‖, ‖ĝ+ê‖)`, which stays
/// accurate near zero where `acos` loses half its digits.
pub fn sam(gt: &HsiCube, est: &HsiCube) -> Result<f64> {
    check_shapes(gt, est)?;
    let (bands, n) = (gt.bands(), gt.pixels());
    let (g, e) = (gt.data(), est.data());
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..n {
        let (mut gg, mut ee) = (0.0f64, 0.0f64);
        for b in 0..bands {
            let (a, c) = (g[b * n + p] as f64, e[b * n + p] as f64);
            gg += a * a;
            ee += c * c;
        }
        let (ng, ne) = (libm::sqrt(gg), libm::sqrt(ee));
        if ng < NORM_FLOOR || ne < NORM_FLOOR {
            continue;
        }
        let (mut diff, mut sum) = (0.0f64, 0.0f64);
        for b in 0..bands {
            let (a, c) = (g[b * n + p] as f64 / ng, e[b * n + p] as f64 / ne);
            diff += (a - c) * (a - c);
            sum += (a + c) * (a + c);
        }
        total += 2.0 * libm::atan2(libm::sqrt(diff), libm::sqrt(sum));
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("SAM: every pixel spectrum is empty".into()));
    }
    Ok((total / counted as f64).to_degrees())
}

fn ergas_from_rmse(gt: &HsiCube, rmse: &[f64], scale: usize) -> Result<f64> {
    if scale == 0 {
        return Err(Error::Argument("ERGAS scale must be positive".into()));
    }
    let n = gt.pixels();
    let mut acc = 0.0;
    for (b, (band, &r)) in gt.data().chunks(n).zip(rmse).enumerate() {
        let mean = PEAK * band.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        if mean < NORM_FLOOR {
            return Err(Error::UndefinedMetric(alloc::format!("ERGAS: band {b} has zero mean")));
        }
        acc += (r / mean) * (r / mean);
    }
    Ok(100.0 / scale as f64 * libm::sqrt(acc / rmse.len() as f64))
}

/// `(100 / S) · sqrt(mean_b (rmse_b / mean_b)²)` with `gt` as reference.
pub fn ergas(gt: &HsiCube, est: &HsiCube, scale: usize) -> Result<f64> {
    ergas_from_rmse(gt, &rmse_per_band(gt, est)?, scale)
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable 'valid' filtering with the SSIM window.
fn filter_valid(img: &[f64], rows: usize, cols: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let k = SSIM_WINDOW;
    let (orow, ocol) = (rows - k + 1, cols - k + 1);
    let mut tmp = vec![0.0; rows * ocol];
    for r in 0..rows {
        for c in 0..ocol {
            tmp[r * ocol + c] = (0..k).map(|i| w[i] * img[r * cols + c + i]).sum();
        }
    }
    let mut out = vec![0.0; orow * ocol];
    for r in 0..orow {
        for c in 0..ocol {
            out[r * ocol + c] = (0..k).map(|i| w[i] * tmp[(r + i) * ocol + c]).sum();
        }
    }
    out
}

fn ssim_band(g: &[f32], e: &[f32], rows: usize, cols: usize, w: &[f64; SSIM_WINDOW]) -> f64 {
    let c1 = (SSIM_K1 * PEAK) * (SSIM_K1 * PEAK);
    let c2 = (SSIM_K2 * PEAK) * (SSIM_K2 * PEAK);
    let x: Vec<f64> = g.iter().map(|&v| PEAK * v as f64).collect();
    let y: Vec<f64> = e.iter().map(|&v| PEAK * v as f64).collect();
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };
    let mu_x = filter_valid(&x, rows, cols, w);
    let mu_y = filter_valid(&y, rows, cols, w);
    let xx = filter_valid(&prod(&x, &x), rows, cols, w);
    let yy = filter_valid(&prod(&y, &y), rows, cols, w);
    let xy = filter_valid(&prod(&x, &y), rows, cols, w);
    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sx = xx[i] - mx * mx;
        let sy = yy[i] - my * my;
        let sxy = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sx + sy + c2));
    }
    total / n as f64
}

/// Gaussian-window SSIM (11×11, σ = 1.5) averaged over windows, then bands.
pub fn ssim(gt: &HsiCube, est: &HsiCube) -> Result<f64> {
    check_shapes(gt, est)?;
    if gt.rows() < SSIM_WINDOW || gt.cols() < SSIM_WINDOW {
        return Err(Error::Argument(alloc::format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            gt.rows(),
            gt.cols()
        )));
    }
    let w = gaussian_window();
    let n = gt.pixels();
    let total: f64 = gt
        .data()
        .chunks(n)
        .zip(est.data().chunks(n))
        .map(|(g, e)| ssim_band(g, e, gt.rows(), gt.cols(), &w))
        .sum();
    Ok(total / gt.bands() as f64)
}

/// Every metric for one (ground truth, estimate) pair.
pub fn evaluate(gt: &HsiCube, est: &HsiCube, scale: usize) -> Result<MetricsReport> {
    let rmse = rmse_per_band(gt, est)?;
    Ok(MetricsReport {
        psnr_db: psnr_from_rmse(&rmse),
        sam_deg: sam(gt, est)?,
        ergas: ergas_from_rmse(gt, &rmse, scale)?,
        ssim: ssim(gt, est)?,
        rmse_per_band: rmse,
    })
}
