//! Adam over a flat parameter buffer, restricted to a set of ranges.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    first: Vec<T>,
    second: Vec<T>,
    steps: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Self { cfg, first: vec![T::zero(); len], second: vec![T::zero(); len], steps: 0 }
    }

    /// One bias-corrected update of `params[r]` for each `r` in `ranges`;
    /// everything outside the ranges is left untouched.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64, ranges: &[Range<usize>]) {
        self.steps += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - libm::pow(b1, self.steps as f64);
        let c2 = 1.0 - libm::pow(b2, self.steps as f64);
        let step = lit::<T>(lr / c1);
        let inv_c2 = lit::<T>(1.0 / c2);
        let (b1, b2, eps) = (lit::<T>(b1), lit::<T>(b2), lit::<T>(self.cfg.eps));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        for r in ranges {
            for i in r.clone() {
                let g = grads[i];
                let m = b1 * self.first[i] + one_b1 * g;
                let v = b2 * self.second[i] + one_b2 * g * g;
                self.first[i] = m;
                self.second[i] = v;
                params[i] -= step * m / ((v * inv_c2).sqrt() + eps);
            }
        }
    }
}
