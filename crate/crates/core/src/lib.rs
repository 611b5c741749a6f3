//! Unsupervised hyperspectral/multispectral image fusion through
//! cycle-consistent domain transformations.
//!
//! From one observed pair (a low-resolution hyperspectral cube `Y` and a
//! high-resolution multispectral cube `Z`) the library learns the spatial
//! blur kernel and the spectral response of the sensors, trains a spatial
//! and a spectral super-resolution network against marginal-matching,
//! cycle-consistency and identity losses, and averages the two
//! super-resolved estimates into the fused high-resolution hyperspectral
//! cube.
//!
//! This crate is `no_std` (with `alloc`). File formats, configuration and
//! the command-line interface live in the `hsifusion` crate.

#![no_std]

extern crate alloc;

pub mod baseline;
pub mod cube;
pub mod degradation;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod schedule;
pub mod seeds;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use cube::HsiCube;
pub use degradation::{simulate_pair, spatial_degrade, spectral_degrade, PsfKernel, SrfMatrix};
pub use error::{Error, Result};
pub use losses::LossBreakdown;
pub use metrics::{evaluate, MetricsReport};
pub use model::{psf_kernel, srf_matrix, Architecture, LogitInit, ModelParams, PsfLogits, SrfLogits};
pub use tensor::Tensor;
pub use trainer::{lr_at, run_fusion, FusionOutput, Mode, TrainConfig, TrainHistory};
