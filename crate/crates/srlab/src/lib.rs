//! Single-image super-resolution laboratory.
//!
//! Everything is built from first principles on a small planar tensor type:
//! valid cross-correlation with hand-derived backward passes, bicubic
//! resampling with the degradation pipeline that manufactures low-resolution
//! training inputs, momentum SGD with per-layer learning rates, and the
//! PSNR/SSIM/MS-SSIM harness used to score reconstructions against ground
//! truth.
//!
//! The numerical core is generic over [`tensor::Scalar`] (`f32` or `f64`):
//! training and inference run in `f32`, while the finite-difference gradient
//! checks in the test suite instantiate the same code paths in `f64`.
//!
//! With the default `parallel` feature the data-parallel loops (filters
//! within a convolution, samples within a batch, images within a dataset)
//! run on rayon; without it they fall back to sequential execution. Both
//! modes produce bit-identical results because every reduction happens in a
//! fixed order.

pub mod error;
pub mod eval;
pub mod image_io;
pub mod model;
pub mod parallel;
pub mod resample;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use parallel::Exec;
pub use tensor::{FilterBank, Scalar, Tensor};
