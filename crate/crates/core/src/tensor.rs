//! Dense channel-major activations used by the networks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// A (channels, rows, cols) array stored channel-major, then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(channels: usize, rows: usize, cols: usize) -> Self {
        Self { channels, rows, cols, data: vec![T::zero(); channels * rows * cols] }
    }

    pub fn from_vec(channels: usize, rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * rows * cols {
            return Err(shape_err!(
                "{} values for a {}x{}x{} tensor",
                data.len(),
                channels,
                rows,
                cols
            ));
        }
        Ok(Self { channels, rows, cols, data })
    }

    pub fn filled(channels: usize, rows: usize, cols: usize, v: T) -> Self {
        Self { channels, rows, cols, data: vec![v; channels * rows * cols] }
    }

    /// Same dims as `self`, new payload.
    pub fn with_data(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { channels: self.channels, rows: self.rows, cols: self.cols, data }
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.rows, self.cols)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    #[inline]
    pub fn at(&self, c: usize, r: usize, col: usize) -> T {
        self.data[(c * self.rows + r) * self.cols + col]
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise mean of two equally shaped tensors.
    pub fn average(&self, other: &Self) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(shape_err!("cannot average {:?} with {:?}", self.shape(), other.shape()));
        }
        let half = crate::scalar::lit::<T>(0.5);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| (a + b) * half).collect();
        Ok(self.with_data(data))
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            channels: self.channels,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN))).collect(),
        }
    }
}
