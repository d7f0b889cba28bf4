//! Image ingestion, denoising and noise-residual extraction.

mod denoise;
mod grid;
mod raster;
pub mod wavelet;

pub use denoise::{denoise, extract_residual, DenoiserConfig};
pub use grid::{PixelGrid, ResidualNoise};
pub use raster::{
    center_crop, decode_image, ingest, load_image, save_gray_png, to_luminance, RasterImage,
    MIN_INGEST_DIM,
};
