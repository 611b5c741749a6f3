//! Separable bicubic resampling (Keys kernel, a = -0.5), half-pixel
//! (align-corners = false) coordinates and symmetric reflection at the
//! borders. The backward pass is the exact adjoint of the forward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

const KEYS_A: f64 = -0.5;

fn keys(x: f64) -> f64 {
    let x = x.abs();
    let a = KEYS_A;
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Symmetric (half-sample) reflection: -1 -> 0, n -> n-1.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// 1-D resampling from `n_in` samples to `n_in * factor` samples.
#[derive(Debug, Clone)]
pub struct Resampler1d<T> {
    pub n_in: usize,
    pub n_out: usize,
    taps: Vec<[(usize, T); 4]>,
}

impl<T: Scalar> Resampler1d<T> {
    pub fn new(n_in: usize, factor: usize) -> Self {
        assert!(n_in > 0 && factor > 0);
        let n_out = n_in * factor;
        let f = factor as f64;
        let taps = (0..n_out)
            .map(|o| {
                let src = (o as f64 + 0.5) / f - 0.5;
                let base = libm::floor(src);
                let t = src - base;
                let base = base as i64;
                let mut row = [(0usize, T::zero()); 4];
                for (k, slot) in row.iter_mut().enumerate() {
                    let offset = k as i64 - 1;
                    *slot = (reflect(base + offset, n_in), lit(keys(t - offset as f64)));
                }
                row
            })
            .collect();
        Self { n_in, n_out, taps }
    }

    /// `out[o] = Σ w · src[i]` over the taps of `o`.
    #[inline]
    fn apply(&self, src: &[T], out: &mut [T]) {
        for (o, taps) in self.taps.iter().enumerate() {
            let mut acc = T::zero();
            for &(i, w) in taps {
                acc += w * src[i];
            }
            out[o] = acc;
        }
    }

    /// As [`Self::apply`] on whole rows of length `len`: output row `o` is
    /// the weighted sum of the input rows its taps name.
    fn apply_rows(&self, src: &[T], out: &mut [T], len: usize) {
        for (o, taps) in self.taps.iter().enumerate() {
            let dst = &mut out[o * len..(o + 1) * len];
            let row = |k: usize| &src[taps[k].0 * len..(taps[k].0 + 1) * len];
            let (w0, w1, w2, w3) = (taps[0].1, taps[1].1, taps[2].1, taps[3].1);
            for ((((d, &a), &b), &c), &e) in dst.iter_mut().zip(row(0)).zip(row(1)).zip(row(2)).zip(row(3)) {
                *d = w0 * a + w1 * b + w2 * c + w3 * e;
            }
        }
    }

    fn apply_rows_adjoint(&self, grad_out: &[T], grad_in: &mut [T], len: usize) {
        for (o, taps) in self.taps.iter().enumerate() {
            let g = &grad_out[o * len..(o + 1) * len];
            for &(i, w) in taps {
                for (d, &v) in grad_in[i * len..(i + 1) * len].iter_mut().zip(g) {
                    *d += w * v;
                }
            }
        }
    }

    #[inline]
    fn apply_adjoint(&self, grad_out: &[T], grad_in: &mut [T]) {
        for (o, taps) in self.taps.iter().enumerate() {
            let g = grad_out[o];
            for &(i, w) in taps {
                grad_in[i] += w * g;
            }
        }
    }
}

/// Bicubic upsampling of every channel by an integer factor.
#[derive(Debug, Clone)]
pub struct BicubicUpsampler<T> {
    vertical: Resampler1d<T>,
    horizontal: Resampler1d<T>,
}

impl<T: Scalar> BicubicUpsampler<T> {
    pub fn new(rows: usize, cols: usize, factor: usize) -> Self {
        Self { vertical: Resampler1d::new(rows, factor), horizontal: Resampler1d::new(cols, factor) }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (rin, cin) = (self.vertical.n_in, self.horizontal.n_in);
        let (rout, cout) = (self.vertical.n_out, self.horizontal.n_out);
        assert_eq!((x.rows, x.cols), (rin, cin), "upsampler built for another size");
        let mut out = Tensor::zeros(x.channels, rout, cout);
        let mut tmp = vec![T::zero(); rin * cout];
        for c in 0..x.channels {
            let src = x.channel(c);
            for r in 0..rin {
                self.horizontal.apply(&src[r * cin..(r + 1) * cin], &mut tmp[r * cout..(r + 1) * cout]);
            }
            self.vertical.apply_rows(&tmp, out.channel_mut(c), cout);
        }
        out
    }

    pub fn backward(&self, grad_out: &Tensor<T>) -> Tensor<T> {
        let (rin, cin) = (self.vertical.n_in, self.horizontal.n_in);
        let cout = self.horizontal.n_out;
        let mut grad_in = Tensor::zeros(grad_out.channels, rin, cin);
        let mut tmp = vec![T::zero(); rin * cout];
        for c in 0..grad_out.channels {
            tmp.iter_mut().for_each(|v| *v = T::zero());
            self.vertical.apply_rows_adjoint(grad_out.channel(c), &mut tmp, cout);
            let dst = grad_in.channel_mut(c);
            for r in 0..rin {
                self.horizontal.apply_adjoint(&tmp[r * cout..(r + 1) * cout], &mut dst[r * cin..(r + 1) * cin]);
            }
        }
        grad_in
    }
}
