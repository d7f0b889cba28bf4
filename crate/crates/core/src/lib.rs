//! Links social-media accounts that belong to the same person by matching the
//! sensor-noise fingerprints of the cameras behind their photos.
//!
//! The pipeline, bottom up:
//!
//! - [`imaging`]: luminance grids, wavelet denoising, noise residuals.
//! - [`fingerprint`]: fingerprint estimation, correlation, the `UCIF` file format.
//! - [`clustering`]: per-account incremental grouping of images by camera,
//!   with small-group (repost) filtering.
//! - [`identity`]: account similarity, the SCF/MCF/UCI schemes, ranking.
//! - [`metrics`]: purity, pairwise precision/recall, MAP, ROC, repost ratios.
//! - [`synth`]: seeded synthetic cameras and benchmark datasets.

pub mod clustering;
mod error;
pub mod fingerprint;
pub mod identity;
pub mod imaging;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
