use crate::error::{Error, Result};

/// A row-major 2D grid of real intensities.
///
/// Every piece of numeric work in the crate (images, residuals, fingerprints)
/// is carried by this type. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width.checked_mul(height).ok_or_else(|| {
            Error::InvalidImage(format!("grid {width}x{height} overflows"))
        })?;
        if values.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} grid needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite value at index {pos}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds a grid by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if a dimension is zero or `f` yields a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values).expect("from_fn produced an invalid grid")
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    /// Internal constructor for buffers whose invariants the caller already holds.
    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// True when every value equals the first one.
    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub(crate) fn ensure_same_dims(&self, other: &PixelGrid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

/// Noise residual of one image: the image minus its denoised version.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNoise(PixelGrid);

impl ResidualNoise {
    pub fn from_grid(grid: PixelGrid) -> Self {
        Self(grid)
    }

    pub fn as_grid(&self) -> &PixelGrid {
        &self.0
    }

    pub fn into_grid(self) -> PixelGrid {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }
}

impl AsRef<PixelGrid> for ResidualNoise {
    fn as_ref(&self) -> &PixelGrid {
        &self.0
    }
}

impl AsRef<PixelGrid> for PixelGrid {
    fn as_ref(&self) -> &PixelGrid {
        self
    }
}
