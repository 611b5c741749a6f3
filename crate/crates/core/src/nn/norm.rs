//! Instance normalization: per-instance, per-channel standardization over
//! the spatial pixels, followed by a learnable per-channel affine map.

use alloc::vec::Vec;

use crate::scalar::{lane_sum, lane_sum2, lit, Scalar};
use crate::tensor::Tensor;

pub const IN_EPS: f64 = 1e-5;

/// Offsets of the per-channel scale and shift in the parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceNorm {
    pub channels: usize,
    pub scale: usize,
    pub shift: usize,
}

#[derive(Debug, Clone)]
pub struct NormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
}

impl InstanceNorm {
    pub fn forward<T: Scalar>(&self, params: &[T], mut x: Tensor<T>) -> (Tensor<T>, NormCache<T>) {
        assert_eq!(x.channels, self.channels, "instance norm channels");
        let n = x.pixels();
        let inv_n = T::one() / lit::<T>(n as f64);
        let eps = lit::<T>(IN_EPS);
        let mut inv_std = Vec::with_capacity(self.channels);
        for c in 0..self.channels {
            let ch = x.channel_mut(c);
            let mean = lane_sum(ch, |v| v) * inv_n;
            let var = lane_sum(ch, |v| (v - mean) * (v - mean)) * inv_n;
            let is = T::one() / (var + eps).sqrt();
            ch.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv_std.push(is);
        }
        let normalized = x.clone();
        for c in 0..self.channels {
            let (g, b) = (params[self.scale + c], params[self.shift + c]);
            x.channel_mut(c).iter_mut().for_each(|v| *v = *v * g + b);
        }
        (x, NormCache { normalized, inv_std })
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        cache: &NormCache<T>,
        mut grad: Tensor<T>,
        grads: &mut [T],
    ) -> Tensor<T> {
        let n = grad.pixels();
        let inv_n = T::one() / lit::<T>(n as f64);
        for c in 0..self.channels {
            let xhat = cache.normalized.channel(c);
            let g = grad.channel_mut(c);
            let sum_dy = lane_sum(g, |v| v);
            let sum_dy_xhat = lane_sum2(g, xhat, |a, b| a * b);
            grads[self.scale + c] += sum_dy_xhat;
            grads[self.shift + c] += sum_dy;
            let k = params[self.scale + c] * cache.inv_std[c];
            for (gi, &xi) in g.iter_mut().zip(xhat) {
                *gi = k * (*gi - (sum_dy + xi * sum_dy_xhat) * inv_n);
            }
        }
        grad
    }
}
