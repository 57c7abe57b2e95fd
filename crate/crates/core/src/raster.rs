//! 8-bit raster images and the grayscale conversions the pipeline runs on.
//!
//! Everything downstream (histograms, CLAHE, the CNN input path) consumes the
//! single-channel [`Raster`]; color inputs are collapsed with Rec.601 luma
//! before any enhancement.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer length {got} does not match {width}x{height} = {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error(
        "region {x},{y} {width}x{height} exceeds raster bounds {raster_width}x{raster_height}"
    )]
    RegionOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        raster_width: usize,
        raster_height: usize,
    },
}

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Raster {
    /// Builds a raster from a row-major pixel buffer.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if pixels.len() != expected {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Constant-valued raster.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, RasterError> {
        Self::from_pixels(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, value: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Nearest-neighbor resample. Source pixel for output (x, y) is the one
    /// whose center is nearest to the back-projected output center.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<Raster, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = (((y as f64 + 0.5) * self.height as f64 / height as f64) as usize)
                .min(self.height - 1);
            for x in 0..width {
                let sx = (((x as f64 + 0.5) * self.width as f64 / width as f64) as usize)
                    .min(self.width - 1);
                pixels.push(self.pixel(sx, sy));
            }
        }
        Raster::from_pixels(width, height, pixels)
    }
}

/// Interleaved 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbRaster {
    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: Vec<[u8; 3]>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if pixels.len() != expected {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// Rectangular region in pixel coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    /// Whole-image region.
    pub fn of(raster: &Raster) -> Self {
        Rect {
            x: 0,
            y: 0,
            width: raster.width(),
            height: raster.height(),
        }
    }

    pub fn check_within(&self, raster: &Raster) -> Result<(), RasterError> {
        let fits = self.width >= 1
            && self.height >= 1
            && self.x + self.width <= raster.width()
            && self.y + self.height <= raster.height();
        if fits {
            Ok(())
        } else {
            Err(RasterError::RegionOutOfBounds {
                x: self.x,
                y: self.y,
                width: self.width,
                height: self.height,
                raster_width: raster.width(),
                raster_height: raster.height(),
            })
        }
    }
}

/// Collapses RGB to grayscale with Rec.601 luma weights.
///
/// Each output pixel is `round(0.299 r + 0.587 g + 0.114 b)`, rounded half
/// away from zero (the convention used everywhere in this crate).
pub fn to_luma(rgb: &RgbRaster) -> Raster {
    let pixels = rgb
        .pixels()
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Raster::from_pixels(rgb.width(), rgb.height(), pixels).expect("luma preserves dimensions")
}
