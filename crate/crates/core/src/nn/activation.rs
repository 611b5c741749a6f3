use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn relu<T: Scalar>(x: &mut Tensor<T>) {
    x.data.iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v = T::zero()
        }
    });
}

/// `out` is the forward output; gradient passes where it is positive.
pub fn relu_backward<T: Scalar>(out: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &o) in grad.data.iter_mut().zip(&out.data) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

pub fn sigmoid<T: Scalar>(x: &mut Tensor<T>) {
    x.data.iter_mut().for_each(|v| *v = T::one() / (T::one() + (-*v).exp()));
}

pub fn sigmoid_backward<T: Scalar>(out: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &o) in grad.data.iter_mut().zip(&out.data) {
        *g *= o * (T::one() - o);
    }
}
