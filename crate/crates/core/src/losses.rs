//! Training objectives. Every ℓ1 term is a mean absolute difference so
//! terms over differently sized cubes stay commensurate.

use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::model::ModelParams;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

/// Components of the full objective, all mean-absolute-error units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub mm: f64,
    pub cyc: f64,
    pub ide: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(mm: f64, cyc: f64, ide: f64) -> Self {
        Self { mm, cyc, ide, total: mm + cyc + ide }
    }

    pub fn is_finite(&self) -> bool {
        self.mm.is_finite() && self.cyc.is_finite() && self.ide.is_finite() && self.total.is_finite()
    }
}

/// `Σ|a−b| / n`, accumulated in `f64`.
pub fn l1_mean<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(shape_err!("l1 between {:?} and {:?}", a.shape(), b.shape()));
    }
    let n = a.data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let s: f64 = a.data.iter().zip(&b.data).map(|(&x, &y)| (x - y).abs().to_f64().unwrap_or(f64::NAN)).sum();
    Ok(s / n as f64)
}

/// Gradient of [`l1_mean`] w.r.t. `a` (zero where `a == b`).
pub fn l1_mean_grad<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let inv = T::one() / lit::<T>(a.data.len() as f64);
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            if x > y {
                inv
            } else if x < y {
                -inv
            } else {
                T::zero()
            }
        })
        .collect();
    a.with_data(data)
}

fn add_into<T: Scalar>(acc: &mut Tensor<T>, other: &Tensor<T>) {
    for (a, &b) in acc.data.iter_mut().zip(&other.data) {
        *a += b;
    }
}

/// Which terms of the objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub marginal: bool,
    pub cycle: bool,
    pub identity: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { marginal: true, cycle: true, identity: true };

    pub fn total(use_cycle: bool) -> Self {
        Terms { cycle: use_cycle, ..Self::ALL }
    }
}

/// Evaluates the selected terms and, when `grads` is given, accumulates
/// the gradient of their sum into it.
pub fn objective<T: Scalar>(
    m: &ModelParams<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    terms: Terms,
    grads: Option<&mut [T]>,
) -> Result<LossBreakdown> {
    let a = m.gy_forward(y)?;
    let b = m.gz_forward(z)?;
    if !a.out.same_shape(&b.out) {
        return Err(shape_err!(
            "G_y output {:?} does not match G_z output {:?}",
            a.out.shape(),
            b.out.shape()
        ));
    }
    let za = m.fz_forward(&a.out)?;
    let yb = m.fy_forward(&b.out)?;
    if !za.out.same_shape(z) || !yb.out.same_shape(y) {
        return Err(shape_err!("inconsistent pair: Y {:?}, Z {:?}", y.shape(), z.shape()));
    }

    let mut g_za = Tensor::zeros(za.out.channels, za.out.rows, za.out.cols);
    let mut g_yb = Tensor::zeros(yb.out.channels, yb.out.rows, yb.out.cols);
    let mut g_a = Tensor::zeros(a.out.channels, a.out.rows, a.out.cols);
    let mut g_b = g_a.clone();
    let want_grad = grads.is_some();
    let mut scratch: Vec<T> = Vec::new();
    let grads: &mut [T] = match grads {
        Some(g) => g,
        None => &mut scratch,
    };

    let mut mm = 0.0;
    if terms.marginal {
        mm = l1_mean(z, &za.out)? + l1_mean(y, &yb.out)?;
        if want_grad {
            add_into(&mut g_za, &l1_mean_grad(&za.out, z));
            add_into(&mut g_yb, &l1_mean_grad(&yb.out, y));
        }
    }

    let mut cyc = 0.0;
    if terms.cycle {
        let c = m.gz_forward(&za.out)?;
        let yc = m.fy_forward(&c.out)?;
        let d = m.gy_forward(&yb.out)?;
        let zd = m.fz_forward(&d.out)?;
        cyc = l1_mean(y, &yc.out)? + l1_mean(z, &zd.out)?;
        if want_grad {
            let g = m.fy_backward(&yc, &l1_mean_grad(&yc.out, y), grads);
            add_into(&mut g_za, &m.gz_backward(&c, &g, grads));
            let g = m.fz_backward(&zd, &l1_mean_grad(&zd.out, z), grads);
            add_into(&mut g_yb, &m.gy_backward(&d, &g, grads));
        }
    }

    let mut ide = 0.0;
    if terms.identity {
        ide = l1_mean(&a.out, &b.out)?;
        if want_grad {
            let g = l1_mean_grad(&a.out, &b.out);
            add_into(&mut g_a, &g);
            add_into(&mut g_b, &g.map(|v| -v));
        }
    }

    if want_grad {
        if terms.marginal || terms.cycle {
            add_into(&mut g_a, &m.fz_backward(&za, &g_za, grads));
            add_into(&mut g_b, &m.fy_backward(&yb, &g_yb, grads));
        }
        m.gy_backward(&a, &g_a, grads);
        m.gz_backward(&b, &g_b, grads);
    }
    Ok(LossBreakdown::new(mm, cyc, ide))
}

/// `‖Z − F_z(G_y(Y))‖ + ‖Y − F_y(G_z(Z))‖`.
pub fn loss_marginal<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>) -> Result<f64> {
    let za = m.forward_fz(&m.forward_gy(y)?)?;
    let yb = m.forward_fy(&m.forward_gz(z)?)?;
    Ok(l1_mean(z, &za)? + l1_mean(y, &yb)?)
}

/// Four-stage round trips back to each observation.
pub fn loss_cycle<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>) -> Result<f64> {
    let y_back = m.forward_fy(&m.forward_gz(&m.forward_fz(&m.forward_gy(y)?)?)?)?;
    let z_back = m.forward_fz(&m.forward_gy(&m.forward_fy(&m.forward_gz(z)?)?)?)?;
    Ok(l1_mean(y, &y_back)? + l1_mean(z, &z_back)?)
}

/// Agreement of the two super-resolved estimates.
pub fn loss_identity<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>) -> Result<f64> {
    l1_mean(&m.forward_gy(y)?, &m.forward_gz(z)?)
}

/// Full objective; the cycle term is reported as zero when disabled.
pub fn loss_total<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>, use_cycle: bool) -> Result<LossBreakdown> {
    objective(m, y, z, Terms::total(use_cycle), None)
}

/// Objective value plus its gradient w.r.t. every parameter. Frozen
/// degradation logits receive zero gradient.
pub fn loss_total_grad<T: Scalar>(
    m: &ModelParams<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    use_cycle: bool,
) -> Result<(LossBreakdown, Vec<T>)> {
    let mut grads = m.zero_grads();
    let b = objective(m, y, z, Terms::total(use_cycle), Some(&mut grads))?;
    Ok((b, grads))
}

/// Cross-degradation agreement `‖F_z(Y) − F_y(Z)‖` on the shared
/// low-resolution multispectral grid.
pub fn loss_pretrain<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>) -> Result<f64> {
    let from_y = m.forward_fz(y)?;
    let from_z = m.forward_fy(z)?;
    if !from_y.same_shape(&from_z) {
        return Err(shape_err!("F_z(Y) {:?} vs F_y(Z) {:?}", from_y.shape(), from_z.shape()));
    }
    l1_mean(&from_y, &from_z)
}

/// [`loss_pretrain`] and its gradient (non-zero only on the PSF/SRF logits).
pub fn loss_pretrain_grad<T: Scalar>(m: &ModelParams<T>, y: &Tensor<T>, z: &Tensor<T>) -> Result<(f64, Vec<T>)> {
    let fz = m.fz_forward(y)?;
    let fy = m.fy_forward(z)?;
    if !fz.out.same_shape(&fy.out) {
        return Err(shape_err!("F_z(Y) {:?} vs F_y(Z) {:?}", fz.out.shape(), fy.out.shape()));
    }
    let loss = l1_mean(&fz.out, &fy.out)?;
    let mut grads = m.zero_grads();
    let g = l1_mean_grad(&fz.out, &fy.out);
    m.fz_backward(&fz, &g, &mut grads);
    m.fy_backward(&fy, &g.map(|v| -v), &mut grads);
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn l1_examples() {
        let a = Tensor::from_vec(1, 1, 2, vec![0.0f64, 1.0]).unwrap();
        let b = Tensor::from_vec(1, 1, 2, vec![1.0f64, 0.0]).unwrap();
        assert_eq!(l1_mean(&a, &a).unwrap(), 0.0);
        assert_eq!(l1_mean(&a, &b).unwrap(), 1.0);
        let c = a.map(|v| v + 0.1);
        assert!((l1_mean(&a, &c).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(l1_mean(&a, &c).unwrap(), l1_mean(&c, &a).unwrap());
        let d = Tensor::from_vec(1, 2, 1, vec![0.0f64, 1.0]).unwrap();
        assert!(l1_mean(&a, &d).is_err());
    }

    #[test]
    fn breakdown_total_is_sum() {
        let b = LossBreakdown::new(0.1, 0.2, 0.3);
        assert!((b.total - 0.6).abs() < 1e-12);
        assert_eq!(LossBreakdown::new(0.0, 0.0, 0.0).total, 0.0);
    }
}
