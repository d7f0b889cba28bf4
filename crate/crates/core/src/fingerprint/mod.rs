//! Camera fingerprint estimation and normalized correlation.

mod file;

pub use file::{decode_fingerprint, encode_fingerprint, load_fingerprint, save_fingerprint, MAGIC};

use crate::error::{Error, Result};
use crate::imaging::{PixelGrid, ResidualNoise};

/// Multiplicative sensor-noise estimate for one putative camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFingerprint {
    grid: PixelGrid,
    support_count: usize,
}

impl CameraFingerprint {
    pub fn new(grid: PixelGrid, support_count: usize) -> Result<Self> {
        if support_count == 0 {
            return Err(Error::EmptyGroup);
        }
        Ok(Self {
            grid,
            support_count,
        })
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn values(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn support_count(&self) -> usize {
        self.support_count
    }
}

impl AsRef<PixelGrid> for CameraFingerprint {
    fn as_ref(&self) -> &PixelGrid {
        &self.grid
    }
}

/// Weighted-ratio fingerprint `S = sum(I*R) / sum(I^2)` over all pairs.
///
/// Pixels whose intensities are zero in every image get `S = 0`.
pub fn estimate_fingerprint<I, R>(pairs: &[(I, R)]) -> Result<CameraFingerprint>
where
    I: AsRef<PixelGrid>,
    R: AsRef<PixelGrid>,
{
    let (first, _) = pairs.first().ok_or(Error::EmptyGroup)?;
    let dims = first.as_ref().dims();
    for (image, residual) in pairs {
        first.as_ref().ensure_same_dims(image.as_ref())?;
        first.as_ref().ensure_same_dims(residual.as_ref())?;
    }
    let values = (0..dims.0 * dims.1)
        .map(|p| {
            let (mut num, mut den) = (0.0, 0.0);
            for (image, residual) in pairs {
                let i = image.as_ref().values()[p];
                num += i * residual.as_ref().values()[p];
                den += i * i;
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();
    CameraFingerprint::new(PixelGrid::from_parts(dims.0, dims.1, values), pairs.len())
}

/// Running sums behind [`estimate_fingerprint`], for incremental updates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAccumulator {
    width: usize,
    height: usize,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    count: usize,
}

impl WeightedAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            numerator: vec![0.0; width * height],
            denominator: vec![0.0; width * height],
            count: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn accumulate(&mut self, image: &PixelGrid, residual: &ResidualNoise) -> Result<()> {
        for dims in [image.dims(), residual.dims()] {
            if dims != self.dims() {
                return Err(Error::DimensionMismatch {
                    left: self.dims(),
                    right: dims,
                });
            }
        }
        let pixels = image.values().iter().zip(residual.values());
        for ((num, den), (&i, &r)) in self
            .numerator
            .iter_mut()
            .zip(self.denominator.iter_mut())
            .zip(pixels)
        {
            *num += i * r;
            *den += i * i;
        }
        self.count += 1;
        Ok(())
    }

    /// Folds another accumulator's sums into this one.
    pub fn absorb(&mut self, other: &WeightedAccumulator) -> Result<()> {
        if other.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        for (a, b) in self.numerator.iter_mut().zip(&other.numerator) {
            *a += b;
        }
        for (a, b) in self.denominator.iter_mut().zip(&other.denominator) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finalize(&self) -> Result<CameraFingerprint> {
        if self.count == 0 {
            return Err(Error::EmptyGroup);
        }
        let values = self
            .numerator
            .iter()
            .zip(&self.denominator)
            .map(|(&n, &d)| if d > 0.0 { n / d } else { 0.0 })
            .collect();
        CameraFingerprint::new(
            PixelGrid::from_parts(self.width, self.height, values),
            self.count,
        )
    }
}

/// Pearson correlation of two equally sized grids, clamped to [-1, 1].
pub fn correlation(a: &PixelGrid, b: &PixelGrid) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let na = NormalizedGrid::new(a)?;
    let nb = NormalizedGrid::new(b)?;
    Ok(na.correlate(&nb))
}

/// A zero-mean, unit-norm copy of a grid.
///
/// Correlating two normalized grids is a single dot product, which is what
/// the clustering loop needs when it evaluates many pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGrid {
    dims: (usize, usize),
    values: Vec<f64>,
}

impl NormalizedGrid {
    pub fn new(grid: &PixelGrid) -> Result<Self> {
        if grid.is_constant() {
            return Err(Error::UndefinedCorrelation);
        }
        let mean = grid.mean();
        let mut values: Vec<f64> = grid.values().iter().map(|v| v - mean).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::UndefinedCorrelation);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self {
            dims: grid.dims(),
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Panics if the dimensions differ; use [`correlation`] for checked access.
    pub fn correlate(&self, other: &NormalizedGrid) -> f64 {
        assert_eq!(self.dims, other.dims, "correlating grids of different size");
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        dot.clamp(-1.0, 1.0)
    }
}
