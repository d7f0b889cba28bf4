use std::path::Path;

use image::DynamicImage;

use super::grid::PixelGrid;
use crate::error::{Error, Result};

/// Images smaller than this in either direction are refused at ingestion.
pub const MIN_INGEST_DIM: usize = 32;

/// An 8-bit interleaved raster as decoded from a container format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl RasterImage {
    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Self {
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }
}

/// Collapses a raster to one luminance channel (ITU-R BT.601 weights).
///
/// One- and two-channel rasters pass their first channel through; alpha is
/// ignored for four-channel input.
pub fn to_luminance(image: &RasterImage) -> Result<PixelGrid> {
    let pixels = image.width.checked_mul(image.height).unwrap_or(0);
    if image.channels == 0 || pixels == 0 {
        return Err(Error::InvalidImage("empty image".into()));
    }
    if image.data.len() != pixels * image.channels {
        return Err(Error::InvalidImage(format!(
            "{}x{}x{} raster needs {} bytes, got {}",
            image.width,
            image.height,
            image.channels,
            pixels * image.channels,
            image.data.len()
        )));
    }
    let values = image
        .data
        .chunks_exact(image.channels)
        .map(|px| match px {
            [r, g, b, ..] => 0.299 * f64::from(*r) + 0.587 * f64::from(*g) + 0.114 * f64::from(*b),
            [v, ..] => f64::from(*v),
            [] => unreachable!(),
        })
        .collect();
    PixelGrid::new(image.width, image.height, values)
}

/// Returns the centered `crop` window; offsets are `floor((dim - crop) / 2)`.
pub fn center_crop(grid: &PixelGrid, crop: (usize, usize)) -> Result<PixelGrid> {
    let (cw, ch) = crop;
    let (w, h) = grid.dims();
    if cw == 0 || ch == 0 {
        return Err(Error::InvalidConfig(format!("crop {cw}x{ch} is empty")));
    }
    if w < cw || h < ch {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: cw,
            min_height: ch,
        });
    }
    if (w, h) == crop {
        return Ok(grid.clone());
    }
    let x0 = (w - cw) / 2;
    let y0 = (h - ch) / 2;
    let mut values = Vec::with_capacity(cw * ch);
    for y in y0..y0 + ch {
        values.extend_from_slice(&grid.values()[y * w + x0..y * w + x0 + cw]);
    }
    Ok(PixelGrid::from_parts(cw, ch, values))
}

/// Luminance conversion, size check and center crop in one step.
pub fn ingest(image: &RasterImage, crop: (usize, usize)) -> Result<PixelGrid> {
    let grid = to_luminance(image)?;
    let min_w = crop.0.max(MIN_INGEST_DIM);
    let min_h = crop.1.max(MIN_INGEST_DIM);
    if grid.width() < min_w || grid.height() < min_h {
        return Err(Error::ImageTooSmall {
            width: grid.width(),
            height: grid.height(),
            min_width: min_w,
            min_height: min_h,
        });
    }
    center_crop(&grid, crop)
}

/// Decodes an encoded image (PNG, JPEG, PNM, TIFF, BMP) from memory.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let img = image::load_from_memory(bytes)?;
    Ok(from_dynamic(img))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

fn from_dynamic(img: DynamicImage) -> RasterImage {
    let (width, height) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        RasterImage::rgb(width, height, img.into_rgb8().into_raw())
    } else {
        RasterImage::gray(width, height, img.into_luma8().into_raw())
    }
}

/// Writes a grid as an 8-bit grayscale PNG, rounding and clamping to [0, 255].
pub fn save_gray_png(grid: &PixelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let data: Vec<u8> = grid
        .values()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf = image::GrayImage::from_raw(grid.width() as u32, grid.height() as u32, data)
        .expect("buffer length matches grid");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
