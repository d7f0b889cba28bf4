//! Periodic orthogonal 2D wavelet transform (Daubechies, 8-tap filter bank).
//!
//! Coefficients are stored in the usual in-place (Mallat) layout: after `L`
//! levels the top-left `w/2^L x h/2^L` block holds the approximation, and each
//! level `l` contributes three detail blocks around the level-`l+1` region.

use crate::error::{Error, Result};

/// Orthonormal Daubechies scaling filter with four vanishing moments.
pub const DAUBECHIES_8: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_6,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_08,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

fn highpass() -> [f64; 8] {
    let h = DAUBECHIES_8;
    let mut g = [0.0; 8];
    for k in 0..8 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        g[k] = sign * h[7 - k];
    }
    g
}

/// One analysis step on a periodic signal of even length.
fn analyze(input: &[f64], out: &mut [f64], g: &[f64; 8]) {
    let n = input.len();
    let half = n / 2;
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..8 {
            let x = input[(2 * i + k) % n];
            a += DAUBECHIES_8[k] * x;
            d += g[k] * x;
        }
        out[i] = a;
        out[half + i] = d;
    }
}

/// Inverse of [`analyze`]: the transpose of the orthogonal analysis operator.
fn synthesize(input: &[f64], out: &mut [f64], g: &[f64; 8]) {
    let n = input.len();
    let half = n / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..half {
        let (a, d) = (input[i], input[half + i]);
        for k in 0..8 {
            out[(2 * i + k) % n] += DAUBECHIES_8[k] * a + g[k] * d;
        }
    }
}

pub(crate) fn check_levels(width: usize, height: usize, levels: usize) -> Result<()> {
    let fits = levels >= 1
        && levels < usize::BITS as usize
        && width % (1 << levels) == 0
        && height % (1 << levels) == 0;
    if !fits {
        return Err(Error::InvalidDecomposition {
            width,
            height,
            levels,
        });
    }
    Ok(())
}

/// Forward transform of a row-major `width x height` buffer, in place.
pub fn forward(data: &mut [f64], width: usize, height: usize, levels: usize) -> Result<()> {
    check_levels(width, height, levels)?;
    let g = highpass();
    let mut line = vec![0.0; width.max(height)];
    let mut out = vec![0.0; width.max(height)];
    for level in 0..levels {
        let (w, h) = (width >> level, height >> level);
        for y in 0..h {
            let row = &mut data[y * width..y * width + w];
            analyze(row, &mut out[..w], &g);
            row.copy_from_slice(&out[..w]);
        }
        for x in 0..w {
            for y in 0..h {
                line[y] = data[y * width + x];
            }
            analyze(&line[..h], &mut out[..h], &g);
            for y in 0..h {
                data[y * width + x] = out[y];
            }
        }
    }
    Ok(())
}

/// Inverse of [`forward`].
pub fn inverse(data: &mut [f64], width: usize, height: usize, levels: usize) -> Result<()> {
    check_levels(width, height, levels)?;
    let g = highpass();
    let mut line = vec![0.0; width.max(height)];
    let mut out = vec![0.0; width.max(height)];
    for level in (0..levels).rev() {
        let (w, h) = (width >> level, height >> level);
        for x in 0..w {
            for y in 0..h {
                line[y] = data[y * width + x];
            }
            synthesize(&line[..h], &mut out[..h], &g);
            for y in 0..h {
                data[y * width + x] = out[y];
            }
        }
        for y in 0..h {
            let row = &mut data[y * width..y * width + w];
            synthesize(row, &mut out[..w], &g);
            row.copy_from_slice(&out[..w]);
        }
    }
    Ok(())
}

/// A rectangular detail subband inside the in-place coefficient layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subband {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

/// The three detail subbands of every level, finest level first.
pub fn detail_subbands(width: usize, height: usize, levels: usize) -> Vec<Subband> {
    let mut bands = Vec::with_capacity(3 * levels);
    for level in 0..levels {
        let (bw, bh) = (width >> (level + 1), height >> (level + 1));
        for (x0, y0) in [(bw, 0), (0, bh), (bw, bh)] {
            bands.push(Subband {
                x0,
                y0,
                width: bw,
                height: bh,
            });
        }
    }
    bands
}
