//! Stride-1 convolutions with `k×k` kernels (k odd) and zero padding `k/2`.
//!
//! For `k > 1` the input is copied once into a zero-padded plane of width
//! `w + 2·pad`. Every kernel tap then reads a shifted, uniformly strided
//! view of that plane, so the convolution becomes `k²` accumulating
//! products over a "wide" output whose extra `2·pad` columns per row are
//! discarded.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::{lane_sum, matmul, MatRef, Scalar};
use crate::tensor::Tensor;

/// Location of one convolution's weights `(cout, cin, k, k)` and bias
/// `(cout)` inside a flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub ksize: usize,
    pub weight: usize,
    pub bias: usize,
}

/// Saved input: the raw tensor for `1×1`, otherwise the padded planes.
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input: Vec<T>,
    rows: usize,
    width: usize,
}

/// Geometry of the padded plane for an `h×w` input.
#[derive(Clone, Copy)]
struct Padded {
    h: usize,
    w: usize,
    pad: usize,
    /// Row length of the padded plane and of the wide output.
    wp: usize,
    /// Elements per padded channel, including a tail so every shifted view
    /// stays in bounds.
    plane: usize,
}

impl Padded {
    fn new(h: usize, w: usize, k: usize) -> Self {
        let pad = k / 2;
        let wp = w + 2 * pad;
        Self { h, w, pad, wp, plane: (h + 2 * pad) * wp + 2 * pad }
    }

    fn wide(&self) -> usize {
        self.h * self.wp
    }

    fn tap_offset(&self, ky: usize, kx: usize) -> usize {
        ky * self.wp + kx
    }
}

impl Conv {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.ksize * self.ksize
    }

    pub fn fan_in(&self) -> usize {
        self.cin * self.ksize * self.ksize
    }

    pub fn weights<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        &params[self.weight..self.weight + self.weight_len()]
    }

    pub fn biases<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        &params[self.bias..self.bias + self.cout]
    }

    /// Weights regrouped per tap: `taps[t]` is the `(cout, cin)` matrix of tap `t`.
    fn tap_weights<T: Scalar>(&self, params: &[T]) -> Vec<T> {
        let kk = self.ksize * self.ksize;
        let w = self.weights(params);
        let mut taps = vec![T::zero(); w.len()];
        for (i, &v) in w.iter().enumerate() {
            let (oc, t) = (i / kk, i % kk);
            taps[t * self.cout * self.cin + oc] = v;
        }
        taps
    }

    pub fn forward<T: Scalar>(&self, params: &[T], x: &Tensor<T>) -> (Tensor<T>, ConvCache<T>) {
        assert_eq!(x.channels, self.cin, "conv input channels");
        let (h, w) = (x.rows, x.cols);
        let mut out = Tensor::zeros(self.cout, h, w);
        let input = if self.ksize == 1 {
            let wm = MatRef::new(self.weights(params), self.cout, self.cin);
            matmul(wm, MatRef::new(&x.data, self.cin, h * w), &mut out.data, false);
            x.data.clone()
        } else {
            let g = Padded::new(h, w, self.ksize);
            let xpad = self.pad_input(x, &g);
            let taps = self.tap_weights(params);
            let mut wide = vec![T::zero(); self.cout * g.wide()];
            let tap_len = self.cout * self.cin;
            for ky in 0..self.ksize {
                for kx in 0..self.ksize {
                    let t = ky * self.ksize + kx;
                    let wm = MatRef::new(&taps[t * tap_len..(t + 1) * tap_len], self.cout, self.cin);
                    let view = MatRef::strided(&xpad[g.tap_offset(ky, kx)..], self.cin, g.wide(), g.plane);
                    matmul(wm, view, &mut wide, t > 0);
                }
            }
            for o in 0..self.cout {
                let dst = out.channel_mut(o);
                for r in 0..h {
                    let src = &wide[o * g.wide() + r * g.wp..][..w];
                    dst[r * w..(r + 1) * w].copy_from_slice(src);
                }
            }
            xpad
        };
        for (o, &b) in self.biases(params).iter().enumerate() {
            out.channel_mut(o).iter_mut().for_each(|v| *v += b);
        }
        (out, ConvCache { input, rows: h, width: w })
    }

    /// Accumulates weight/bias gradients into `grads`; returns the input gradient.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        cache: &ConvCache<T>,
        grad_out: &Tensor<T>,
        grads: &mut [T],
    ) -> Tensor<T> {
        let (h, w) = (cache.rows, cache.width);
        let p = h * w;
        assert_eq!(grad_out.data.len(), self.cout * p);
        for o in 0..self.cout {
            let s = lane_sum(grad_out.channel(o), |v| v);
            grads[self.bias + o] += s;
        }
        if self.ksize == 1 {
            let dy = MatRef::new(&grad_out.data, self.cout, p);
            let dw = &mut grads[self.weight..self.weight + self.weight_len()];
            matmul(dy, MatRef::new(&cache.input, self.cin, p).t(), dw, true);
            let mut dx = Tensor::zeros(self.cin, h, w);
            matmul(MatRef::new(self.weights(params), self.cout, self.cin).t(), dy, &mut dx.data, false);
            return dx;
        }
        let g = Padded::new(h, w, self.ksize);
        let kk = self.ksize * self.ksize;
        let wide = g.wide();
        let mut dy_wide = vec![T::zero(); self.cout * wide];
        for o in 0..self.cout {
            let src = grad_out.channel(o);
            for r in 0..h {
                dy_wide[o * wide + r * g.wp..][..w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
        }
        // Wrap-around columns of the wide output carry zero gradient, so
        // the full shifted rows can be used as they are.
        let dy = MatRef::new(&dy_wide, self.cout, wide);
        let mut col = Vec::with_capacity(self.cin * kk * wide);
        for c in 0..self.cin {
            for t in 0..kk {
                let off = g.tap_offset(t / self.ksize, t % self.ksize);
                col.extend_from_slice(&cache.input[c * g.plane + off..][..wide]);
            }
        }
        let dw = &mut grads[self.weight..self.weight + self.weight_len()];
        matmul(dy, MatRef::new(&col, self.cin * kk, wide).t(), dw, true);

        // Reuse the buffer for the per-tap input gradients.
        let wm = MatRef::new(self.weights(params), self.cout, self.cin * kk);
        matmul(wm.t(), dy, &mut col, false);
        let mut dxpad = vec![T::zero(); self.cin * g.plane];
        for c in 0..self.cin {
            for t in 0..kk {
                let off = g.tap_offset(t / self.ksize, t % self.ksize);
                let dst = &mut dxpad[c * g.plane + off..][..wide];
                for (d, &v) in dst.iter_mut().zip(&col[(c * kk + t) * wide..][..wide]) {
                    *d += v;
                }
            }
        }
        let mut dx = Tensor::zeros(self.cin, h, w);
        for c in 0..self.cin {
            let dst = dx.channel_mut(c);
            for r in 0..h {
                let src = &dxpad[c * g.plane + (r + g.pad) * g.wp + g.pad..][..w];
                dst[r * w..(r + 1) * w].copy_from_slice(src);
            }
        }
        dx
    }

    fn pad_input<T: Scalar>(&self, x: &Tensor<T>, g: &Padded) -> Vec<T> {
        let mut xpad = vec![T::zero(); self.cin * g.plane];
        for c in 0..self.cin {
            let src = x.channel(c);
            for r in 0..g.h {
                let start = c * g.plane + (r + g.pad) * g.wp + g.pad;
                xpad[start..start + g.w].copy_from_slice(&src[r * g.w..(r + 1) * g.w]);
            }
        }
        xpad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_conv(conv: &Conv, params: &[f64], x: &Tensor<f64>) -> Tensor<f64> {
        let k = conv.ksize as isize;
        let pad = k / 2;
        let mut out = Tensor::zeros(conv.cout, x.rows, x.cols);
        for o in 0..conv.cout {
            for r in 0..x.rows as isize {
                for c in 0..x.cols as isize {
                    let mut acc = params[conv.bias + o];
                    for i in 0..conv.cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let (sr, sc) = (r + ky - pad, c + kx - pad);
                                if sr < 0 || sc < 0 || sr >= x.rows as isize || sc >= x.cols as isize {
                                    continue;
                                }
                                let wi = conv.weight + ((o * conv.cin + i) * conv.ksize + ky as usize) * conv.ksize + kx as usize;
                                acc += params[wi] * x.at(i, sr as usize, sc as usize);
                            }
                        }
                    }
                    out.data[(o * x.rows + r as usize) * x.cols + c as usize] = acc;
                }
            }
        }
        out
    }

    fn setup(ksize: usize) -> (Conv, Vec<f64>, Tensor<f64>) {
        let conv = Conv { cin: 2, cout: 3, ksize, weight: 0, bias: 3 * 2 * ksize * ksize };
        let n = conv.bias + 3;
        let params: Vec<f64> = (0..n).map(|i| ((i * 37 % 23) as f64 - 11.0) / 10.0).collect();
        let x = Tensor::from_vec(2, 4, 5, (0..40).map(|i| ((i * 17 % 13) as f64) / 13.0).collect()).unwrap();
        (conv, params, x)
    }

    #[test]
    fn matches_direct_convolution() {
        for k in [1, 3] {
            let (conv, params, x) = setup(k);
            let (y, _) = conv.forward(&params, &x);
            let d = direct_conv(&conv, &params, &x);
            for (a, b) in y.data.iter().zip(&d.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for k in [1, 3] {
            let (conv, params, x) = setup(k);
            let g = Tensor::from_vec(3, 4, 5, (0..60).map(|i| ((i * 29 % 19) as f64) / 19.0 - 0.5).collect()).unwrap();
            let loss = |p: &[f64], x: &Tensor<f64>| -> f64 {
                conv.forward(p, x).0.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = conv.forward(&params, &x);
            let mut grads = vec![0.0; params.len()];
            let dx = conv.backward(&params, &cache, &g, &mut grads);
            let h = 1e-6;
            for i in 0..params.len() {
                let mut pp = params.clone();
                pp[i] += h;
                let mut pm = params.clone();
                pm[i] -= h;
                let num = (loss(&pp, &x) - loss(&pm, &x)) / (2.0 * h);
                assert!((num - grads[i]).abs() < 1e-7, "param {i}: {num} vs {}", grads[i]);
            }
            for i in 0..x.data.len() {
                let mut xp = x.clone();
                xp.data[i] += h;
                let mut xm = x.clone();
                xm.data[i] -= h;
                let num = (loss(&params, &xp) - loss(&params, &xm)) / (2.0 * h);
                assert!((num - dx.data[i]).abs() < 1e-7);
            }
        }
    }
}
