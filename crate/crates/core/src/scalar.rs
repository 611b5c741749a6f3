//! Floating-point abstraction so the same network code runs in `f32` for
//! training and in `f64` for gradient verification.

use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    /// `c = a·b` (or `c += a·b` when `accumulate`) with arbitrary
    /// row/column strides.
    ///
    /// # Safety
    /// The strided extents of `a` (m×k), `b` (k×n) and `c` (m×n) must lie
    /// within the pointed-to allocations.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
        csc: isize,
        accumulate: bool,
    );

    fn from_f64_lossy(v: f64) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            unsafe fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                a: *const $t,
                rsa: isize,
                csa: isize,
                b: *const $t,
                rsb: isize,
                csb: isize,
                c: *mut $t,
                rsc: isize,
                csc: isize,
                accumulate: bool,
            ) {
                let beta = if accumulate { 1.0 } else { 0.0 };
                $gemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }

            fn from_f64_lossy(v: f64) -> $t {
                v as $t
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Shorthand for converting an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64_lossy(v)
}

const LANES: usize = 8;

/// Sum of `f(x_i, y_i)` over two equal-length slices using independent
/// lane accumulators, which lets the compiler vectorize the reduction.
#[inline]
pub fn lane_sum2<T: Scalar>(x: &[T], y: &[T], f: impl Fn(T, T) -> T) -> T {
    assert_eq!(x.len(), y.len());
    let mut acc = [T::zero(); LANES];
    let mut xc = x.chunks_exact(LANES);
    let mut yc = y.chunks_exact(LANES);
    for (a, b) in (&mut xc).zip(&mut yc) {
        for l in 0..LANES {
            acc[l] += f(a[l], b[l]);
        }
    }
    let mut tail = T::zero();
    for (&a, &b) in xc.remainder().iter().zip(yc.remainder()) {
        tail += f(a, b);
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// Sum of `f(x_i)` with lane accumulators.
#[inline]
pub fn lane_sum<T: Scalar>(x: &[T], f: impl Fn(T) -> T) -> T {
    lane_sum2(x, x, |a, _| f(a))
}

/// Row-major matrix view with leading dimension `ld`, optionally transposed.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
    pub transposed: bool,
}

impl<'a, T> MatRef<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { data, rows, cols, ld: cols, transposed: false }
    }

    /// View whose consecutive rows start `ld` elements apart.
    pub fn strided(data: &'a [T], rows: usize, cols: usize, ld: usize) -> Self {
        assert!(ld >= cols, "leading dimension below column count");
        assert!(rows == 0 || data.len() >= (rows - 1) * ld + cols, "strided view out of bounds");
        Self { data, rows, cols, ld, transposed: false }
    }

    pub fn t(self) -> Self {
        Self { transposed: !self.transposed, ..self }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.ld as isize)
        } else {
            (self.ld as isize, 1)
        }
    }
}

/// `out = a·b` (or `out += a·b` when `accumulate`), `out` row-major m×n.
pub fn matmul<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, out: &mut [T], accumulate: bool) {
    let n = b.shape().1;
    assert_eq!(out.len(), a.shape().0 * n, "output length");
    matmul_strided(a, b, out, n, accumulate);
}

/// As [`matmul`], with output rows `out_ld` elements apart.
pub fn matmul_strided<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, out: &mut [T], out_ld: usize, accumulate: bool) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert!(out_ld >= n);
    if m == 0 || n == 0 {
        return;
    }
    assert!(out.len() >= (m - 1) * out_ld + n, "output view out of bounds");
    if k == 0 {
        if !accumulate {
            for r in 0..m {
                out[r * out_ld..r * out_ld + n].iter_mut().for_each(|v| *v = T::zero());
            }
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: every view's extent was checked against its slice above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            out.as_mut_ptr(),
            out_ld as isize,
            1,
            accumulate,
        );
    }
}
