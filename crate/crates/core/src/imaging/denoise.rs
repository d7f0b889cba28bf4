//! Wavelet-domain local Wiener denoising and noise-residual extraction.
//!
//! Each detail coefficient `c` is shrunk by `v / (v + s0)` where `s0` is the
//! assumed noise variance and `v` the local signal variance, estimated as the
//! smallest windowed mean of `c^2` over all configured window sizes minus
//! `s0` (floored at zero). Windows are clipped at subband edges. The
//! approximation subband is left untouched.

use serde::{Deserialize, Serialize};

use super::grid::{PixelGrid, ResidualNoise};
use super::wavelet::{self, Subband};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub wavelet_levels: usize,
    /// Noise variance assumed in every detail subband, in intensity^2.
    pub noise_variance: f64,
    pub window_sizes: Vec<usize>,
    /// Common `(width, height)` every ingested image is center-cropped to.
    pub crop: (usize, usize),
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            wavelet_levels: 4,
            noise_variance: 81.0,
            window_sizes: vec![3, 5, 7, 9],
            crop: (256, 256),
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.wavelet_levels == 0 {
            return Err(Error::InvalidConfig("wavelet_levels must be >= 1".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_variance must be > 0, got {}",
                self.noise_variance
            )));
        }
        if self.window_sizes.is_empty() {
            return Err(Error::InvalidConfig("window_sizes is empty".into()));
        }
        if let Some(w) = self.window_sizes.iter().find(|&&w| w < 3 || w % 2 == 0) {
            return Err(Error::InvalidConfig(format!(
                "window size {w} must be odd and >= 3"
            )));
        }
        if self.crop.0 == 0 || self.crop.1 == 0 {
            return Err(Error::InvalidConfig("crop dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Denoises `grid`; the output has the same dimensions.
pub fn denoise(grid: &PixelGrid, cfg: &DenoiserConfig) -> Result<PixelGrid> {
    cfg.validate()?;
    let (w, h) = grid.dims();
    wavelet::check_levels(w, h, cfg.wavelet_levels)?;

    let mut coeffs = grid.values().to_vec();
    wavelet::forward(&mut coeffs, w, h, cfg.wavelet_levels)?;
    for band in wavelet::detail_subbands(w, h, cfg.wavelet_levels) {
        shrink_subband(&mut coeffs, w, band, &cfg.window_sizes, cfg.noise_variance);
    }
    wavelet::inverse(&mut coeffs, w, h, cfg.wavelet_levels)?;
    Ok(PixelGrid::from_parts(w, h, coeffs))
}

/// `grid - denoise(grid)`, elementwise.
pub fn extract_residual(grid: &PixelGrid, cfg: &DenoiserConfig) -> Result<ResidualNoise> {
    let denoised = denoise(grid, cfg)?;
    let values = grid
        .values()
        .iter()
        .zip(denoised.values())
        .map(|(g, d)| g - d)
        .collect();
    Ok(ResidualNoise::from_grid(PixelGrid::from_parts(
        grid.width(),
        grid.height(),
        values,
    )))
}

fn shrink_subband(coeffs: &mut [f64], stride: usize, band: Subband, windows: &[usize], s0: f64) {
    let (bw, bh) = (band.width, band.height);
    let mut squares = Vec::with_capacity(bw * bh);
    for y in 0..bh {
        let row = (band.y0 + y) * stride + band.x0;
        squares.extend(coeffs[row..row + bw].iter().map(|c| c * c));
    }

    let mut local = vec![f64::INFINITY; bw * bh];
    let mut rows = vec![0.0; bw * bh];
    for &size in windows {
        let r = size / 2;
        // Horizontal window sums, then vertical sums of those.
        for y in 0..bh {
            for x in 0..bw {
                let (lo, hi) = (x.saturating_sub(r), (x + r).min(bw - 1));
                rows[y * bw + x] = squares[y * bw + lo..=y * bw + hi].iter().sum();
            }
        }
        for y in 0..bh {
            let (ylo, yhi) = (y.saturating_sub(r), (y + r).min(bh - 1));
            for x in 0..bw {
                let (xlo, xhi) = (x.saturating_sub(r), (x + r).min(bw - 1));
                let sum: f64 = (ylo..=yhi).map(|yy| rows[yy * bw + x]).sum();
                let count = ((yhi - ylo + 1) * (xhi - xlo + 1)) as f64;
                let mean = sum / count;
                let slot = &mut local[y * bw + x];
                if mean < *slot {
                    *slot = mean;
                }
            }
        }
    }

    for y in 0..bh {
        let row = (band.y0 + y) * stride + band.x0;
        for x in 0..bw {
            let signal = (local[y * bw + x] - s0).max(0.0);
            coeffs[row + x] *= signal / (signal + s0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> DenoiserConfig {
        DenoiserConfig {
            crop: (64, 64),
            ..DenoiserConfig::default()
        }
    }

    #[test]
    fn constant_grid_is_a_fixed_point() {
        let g = PixelGrid::filled(64, 64, 128.0);
        let d = denoise(&g, &small_cfg()).unwrap();
        for v in d.values() {
            assert!((v - 128.0).abs() < 1e-9);
        }
        let r = extract_residual(&g, &small_cfg()).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn tiny_noise_variance_keeps_the_input() {
        let g = PixelGrid::from_fn(64, 64, |x, y| ((x * 31 + y * 17) % 97) as f64 * 2.0);
        let cfg = DenoiserConfig {
            noise_variance: 1e-12,
            ..small_cfg()
        };
        let d = denoise(&g, &cfg).unwrap();
        for (a, b) in g.values().iter().zip(d.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn too_small_for_levels() {
        let g = PixelGrid::filled(8, 8, 1.0);
        assert!(matches!(
            denoise(&g, &small_cfg()),
            Err(Error::InvalidDecomposition { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = DenoiserConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.window_sizes = vec![3, 4];
        assert!(cfg.validate().is_err());
        cfg = DenoiserConfig {
            noise_variance: 0.0,
            ..DenoiserConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = DenoiserConfig {
            wavelet_levels: 0,
            ..DenoiserConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
