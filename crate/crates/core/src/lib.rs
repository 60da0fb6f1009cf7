//! Diffusion-based local image descriptors.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: Gaussian kernels, `erfcx`, the heat factor `w` and the
//!   closed-form integrals the descriptors are assembled from.
//! - [`field`]: sampled images, bilinear sampling, gradients and warps.
//! - [`descriptors`]: orientation densities `h(β, x)` (SIFT, DSP variants,
//!   heat, distribution fields, raw density).
//! - [`matching`]: descriptor distance, correlation and winner-take-all
//!   template matching.
//! - [`homotopy`]: Gaussian smoothing of cost landscapes and the
//!   diffusion/continuation minimizer on a 1D matching toy problem.

pub mod descriptors;
pub mod error;
pub mod field;
pub mod homotopy;
pub mod kernels;
pub mod matching;

pub use error::{Error, Result};
