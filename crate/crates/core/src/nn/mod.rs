//! Differentiable building blocks. Every layer exposes a forward pass that
//! returns its output plus whatever the backward pass needs, and a backward
//! pass that accumulates parameter gradients into a flat buffer and returns
//! the gradient with respect to its input.

pub mod activation;
pub mod conv;
pub mod interp;
pub mod norm;
pub mod softmax;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward};
pub use conv::{Conv, ConvCache};
pub use interp::{BicubicUpsampler, Resampler1d};
pub use norm::{InstanceNorm, NormCache, IN_EPS};
pub use softmax::{softmax, softmax_backward};
