//! Contrastive dimensionality reduction (PCA, cPCA, cPCA++), oblique
//! factorization for denoising, and patch-based splice localization.

// Checks written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod datagen;
pub mod error;
pub mod factor;
pub mod image;
pub mod io;
pub mod linalg;
pub mod reducers;
pub mod rng;
pub mod splicing;
pub mod stats;

pub use error::{Error, Result};
