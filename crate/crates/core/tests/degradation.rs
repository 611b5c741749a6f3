//! Degradation operators against brute-force oracles, plus their algebraic
//! properties (simplex constraints, linearity, commutation, equivariance).

use hsifusion_core::degradation::add_white_noise;
use hsifusion_core::{
    psf_kernel, simulate_pair, spatial_degrade, spectral_degrade, srf_matrix, HsiCube, PsfKernel, PsfLogits, SrfLogits,
    SrfMatrix, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cube_from(bands: usize, rows: usize, cols: usize, f: impl Fn(usize) -> f32) -> HsiCube {
    HsiCube::new(bands, rows, cols, (0..bands * rows * cols).map(f).collect()).unwrap()
}

fn random_cube(bands: usize, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> HsiCube {
    let data = (0..bands * rows * cols).map(|_| rng.random_range(0.05f32..0.95)).collect();
    HsiCube::new(bands, rows, cols, data).unwrap()
}

fn random_kernel(s: usize, rng: &mut ChaCha8Rng) -> PsfKernel {
    PsfKernel::normalized(s, (0..s * s).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn random_srf(l: usize, big_l: usize, rng: &mut ChaCha8Rng) -> SrfMatrix {
    let rows: Vec<Vec<f64>> = (0..l).map(|_| (0..big_l).map(|_| rng.random_range(0.01..1.0)).collect()).collect();
    SrfMatrix::from_rows(&rows).unwrap()
}

/// Explicit block loops.
fn brute_spatial(x: &HsiCube, k: &PsfKernel) -> Vec<f64> {
    let s = k.scale();
    let (h, w) = (x.rows() / s, x.cols() / s);
    let mut out = Vec::new();
    for b in 0..x.bands() {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for u in 0..s {
                    for v in 0..s {
                        acc += k.get(u, v) * x.get(b, i * s + u, j * s + v) as f64;
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Explicit per-pixel matrix-vector products.
fn brute_spectral(x: &HsiCube, r: &SrfMatrix) -> Vec<f64> {
    let mut out = vec![0.0; r.msi_bands() * x.pixels()];
    for row in 0..x.rows() {
        for col in 0..x.cols() {
            let spec = x.spectrum(row, col);
            for i in 0..r.msi_bands() {
                let v: f64 = r.row(i).iter().zip(&spec).map(|(a, &b)| a * b as f64).sum();
                out[i * x.pixels() + row * x.cols() + col] = v;
            }
        }
    }
    out
}

fn max_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y).abs()).fold(0.0, f64::max)
}

#[test]
fn operators_match_brute_force_on_random_cubes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let bands = rng.random_range(2..=8);
        let s = [1, 2, 4, 8][rng.random_range(0..4)];
        let rows = s * rng.random_range(1..=32 / s);
        let cols = s * rng.random_range(1..=32 / s);
        let x = random_cube(bands, rows, cols, &mut rng);
        let k = random_kernel(s, &mut rng);
        let r = random_srf(rng.random_range(1..bands), bands, &mut rng);
        assert!(max_diff(spatial_degrade(&x, &k).unwrap().data(), &brute_spatial(&x, &k)) < 1e-6);
        assert!(max_diff(spectral_degrade(&x, &r).unwrap().data(), &brute_spectral(&x, &r)) < 1e-6);
    }
}

#[test]
fn ramp_block_means() {
    let x = cube_from(1, 4, 4, |i| (i + 1) as f32 / 16.0);
    let y = spatial_degrade(&x, &PsfKernel::block_average(2).unwrap()).unwrap();
    let want = [3.5, 5.5, 11.5, 13.5].map(|v| v / 16.0);
    assert!(max_diff(y.data(), &want) < 1e-7);
}

#[test]
fn identity_srf_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_cube(3, 4, 5, &mut rng);
    let z = spectral_degrade(&x, &SrfMatrix::identity(3).unwrap()).unwrap();
    assert_eq!(z.data(), x.data());
}

#[test]
fn srf_table_normalization_examples() {
    let r = SrfMatrix::from_rows(&[vec![2.0, 2.0], vec![1.0, 3.0]]).unwrap();
    assert_eq!(r.weights(), &[0.5, 0.5, 0.25, 0.75]);
    let again = SrfMatrix::from_rows(&[r.row(0).to_vec(), r.row(1).to_vec()]).unwrap();
    assert_eq!(again, r);
    assert!(SrfMatrix::from_rows(&[vec![0.0, 0.0]]).is_err());
    assert!(SrfMatrix::from_rows(&[vec![1.0, -1.0, 1.0]]).is_err());
}

#[test]
fn block_average_kernel_at_scale_32() {
    let k = PsfKernel::block_average(32).unwrap();
    assert!(k.weights().iter().all(|&w| w == 1.0 / 1024.0));
    assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert!(PsfKernel::block_average(0).is_err());
}

#[test]
fn simulated_noise_hits_requested_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_cube(8, 32, 32, &mut rng);
    let t: Tensor<f64> = x.to_tensor();
    let noisy = add_white_noise(&t, 30.0, &mut ChaCha8Rng::seed_from_u64(6));
    let signal: f64 = t.data.iter().map(|v| v * v).sum();
    let noise: f64 = noisy.data.iter().zip(&t.data).map(|(a, b)| (a - b) * (a - b)).sum();
    let snr = 10.0 * (signal / noise).log10();
    assert!((snr - 30.0).abs() < 0.5, "measured {snr} dB");
}

#[test]
fn simulate_pair_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_cube(4, 8, 8, &mut rng);
    let k = PsfKernel::block_average(2).unwrap();
    let r = random_srf(2, 4, &mut rng);
    let a = simulate_pair(&x, &k, &r, Some(25.0), 3).unwrap();
    let b = simulate_pair(&x, &k, &r, Some(25.0), 3).unwrap();
    let c = simulate_pair(&x, &k, &r, Some(25.0), 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    let clean = simulate_pair(&x, &k, &r, None, 0).unwrap();
    assert_eq!(clean.0, spatial_degrade(&x, &k).unwrap());
    assert_eq!(clean.1, spectral_degrade(&x, &r).unwrap());
}

fn logits(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn psf_softmax_is_on_the_simplex(s in 1usize..6, raw in logits(25)) {
        let k = psf_kernel(&PsfLogits { scale: s, logits: raw[..s * s].to_vec() }).unwrap();
        prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
        prop_assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn srf_softmax_rows_are_on_the_simplex(l in 1usize..4, big_l in 4usize..8, raw in logits(32)) {
        let r = srf_matrix(&SrfLogits { msi_bands: l, hsi_bands: big_l, logits: raw[..l * big_l].to_vec() }).unwrap();
        for i in 0..l {
            prop_assert!(r.row(i).iter().all(|&w| w >= 0.0));
            prop_assert!((r.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn operators_are_linear(seed in any::<u64>(), a in 0.1f64..0.5, b in 0.1f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x1, x2) = (random_cube(3, 8, 8, &mut rng), random_cube(3, 8, 8, &mut rng));
        let mix = cube_from(3, 8, 8, |i| (a * x1.data()[i] as f64 + b * x2.data()[i] as f64) as f32);
        let k = random_kernel(4, &mut rng);
        let r = random_srf(2, 3, &mut rng);
        let check = |lhs: &HsiCube, o1: &HsiCube, o2: &HsiCube| {
            lhs.data().iter().zip(o1.data()).zip(o2.data())
                .all(|((&m, &p), &q)| (m as f64 - (a * p as f64 + b * q as f64)).abs() < 1e-5)
        };
        prop_assert!(check(&spatial_degrade(&mix, &k).unwrap(), &spatial_degrade(&x1, &k).unwrap(), &spatial_degrade(&x2, &k).unwrap()));
        prop_assert!(check(&spectral_degrade(&mix, &r).unwrap(), &spectral_degrade(&x1, &r).unwrap(), &spectral_degrade(&x2, &r).unwrap()));
    }

    #[test]
    fn spatial_and_spectral_degradations_commute(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cube(5, 8, 8, &mut rng);
        let k = random_kernel(4, &mut rng);
        let r = random_srf(3, 5, &mut rng);
        let a = spectral_degrade(&spatial_degrade(&x, &k).unwrap(), &r).unwrap();
        let b = spatial_degrade(&spectral_degrade(&x, &r).unwrap(), &k).unwrap();
        let worst = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).fold(0.0f32, f32::max);
        prop_assert!(worst < 1e-5);
    }

    #[test]
    fn spatial_degrade_commutes_with_band_permutation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cube(4, 8, 8, &mut rng);
        let k = random_kernel(2, &mut rng);
        let perm = [2usize, 0, 3, 1];
        let permute = |c: &HsiCube| {
            let m = c.pixels();
            cube_from(c.bands(), c.rows(), c.cols(), |i| c.data()[perm[i / m] * m + i % m])
        };
        let lhs = spatial_degrade(&permute(&x), &k).unwrap();
        let rhs = permute(&spatial_degrade(&x, &k).unwrap());
        prop_assert_eq!(lhs.data(), rhs.data());
    }

    #[test]
    fn spectral_degrade_commutes_with_pixel_permutation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cube(4, 6, 6, &mut rng);
        let r = random_srf(2, 4, &mut rng);
        let n = x.pixels();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let permute = |c: &HsiCube| cube_from(c.bands(), c.rows(), c.cols(), |i| c.data()[(i / n) * n + perm[i % n]]);
        let lhs = spectral_degrade(&permute(&x), &r).unwrap();
        let rhs = permute(&spectral_degrade(&x, &r).unwrap());
        prop_assert_eq!(lhs.data(), rhs.data());
    }

    #[test]
    fn constant_spectrum_survives_any_srf(c in 0.0f32..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cube_from(5, 3, 3, |_| c);
        let z = spectral_degrade(&x, &random_srf(3, 5, &mut rng)).unwrap();
        prop_assert!(z.data().iter().all(|&v| (v - c).abs() < 1e-6));
    }
}
