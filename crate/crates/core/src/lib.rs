//! Synthetic 2D blind deconvolution benchmark library.
//!
//! Implements a fully controlled forward model `y = h * x + eps` (circular
//! convolution of a DCT-sparse signal with a Gaussian blur kernel under
//! white noise), the closed-form blind LMMSE estimator built from
//! theoretical or empirical moments, two MAP alternating-minimization
//! solvers with LMMSE-boosted initialization variants, and the experiment
//! harness that benchmarks them against each other.

pub mod conv;
pub mod dct;
pub mod error;
pub mod image;
pub mod io;
pub mod lmmse;
pub mod moments;
pub mod priors;
pub mod quad;

pub use error::{Error, Result};
