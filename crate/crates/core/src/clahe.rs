//! Tiled adaptive histogram equalization with contrast limiting.
//!
//! The image is split into a `grid_x` by `grid_y` grid of equal tiles
//! (edge-replication padding makes the dimensions divisible, and the result
//! is cropped back). Each tile gets its own equalization lookup table built
//! from a clipped histogram; the per-pixel output bilinearly blends the
//! mappings of the up-to-four surrounding tile centers, which removes the
//! blocky seams plain per-tile equalization would leave. Disabling the clip
//! (`clip_factor: None`) gives plain adaptive equalization, and a 1x1 grid
//! reduces to global histogram equalization.
//!
//! Tile centers sit at `(i + 0.5) * tile_w - 0.5` in pixel coordinates.
//! Pixels outside the outermost centers fall back to two-table interpolation
//! along the remaining axis, or to the single corner table. Blending runs in
//! `f64` and rounds once at the end, so output is bit-identical for any
//! degree of parallelism.

use rayon::prelude::*;
use thiserror::Error;

use crate::histogram::{compute_histogram, equalize_mapping, Histogram256, LookupTable};
use crate::raster::{Raster, Rect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClaheError {
    #[error("tile grid must be at least 1x1, got {grid_x}x{grid_y}")]
    EmptyGrid { grid_x: usize, grid_y: usize },
    #[error("clip factor must be positive and finite")]
    InvalidClipFactor,
    #[error("clip limit must be at least 1")]
    InvalidClipLimit,
    #[error("grid {grid_x}x{grid_y} exceeds image dimensions {width}x{height}")]
    GridLargerThanImage {
        grid_x: usize,
        grid_y: usize,
        width: usize,
        height: usize,
    },
    #[error(
        "tile grid was built for {expected_w}x{expected_h} tiles, image implies {got_w}x{got_h}"
    )]
    GridMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
}

/// Enhancement parameters: tile counts per axis and the contrast limit.
///
/// `clip_factor` is a multiple of the tile's mean bin count
/// (`tile_pixels / 256`); `None` disables clipping entirely (AHE mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheParams {
    grid_x: usize,
    grid_y: usize,
    clip_factor: Option<f64>,
}

impl ClaheParams {
    pub fn new(grid_x: usize, grid_y: usize, clip_factor: Option<f64>) -> Result<Self, ClaheError> {
        if grid_x < 1 || grid_y < 1 {
            return Err(ClaheError::EmptyGrid { grid_x, grid_y });
        }
        if let Some(f) = clip_factor {
            if !(f.is_finite() && f > 0.0) {
                return Err(ClaheError::InvalidClipFactor);
            }
        }
        Ok(Self {
            grid_x,
            grid_y,
            clip_factor,
        })
    }

    pub fn grid_x(&self) -> usize {
        self.grid_x
    }

    pub fn grid_y(&self) -> usize {
        self.grid_y
    }

    pub fn clip_factor(&self) -> Option<f64> {
        self.clip_factor
    }
}

/// Per-tile lookup tables plus the geometry needed to blend them.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    grid_x: usize,
    grid_y: usize,
    tile_w: usize,
    tile_h: usize,
    /// Row-major tile order: index = ty * grid_x + tx.
    luts: Vec<LookupTable>,
}

impl TileGrid {
    pub fn grid_x(&self) -> usize {
        self.grid_x
    }

    pub fn grid_y(&self) -> usize {
        self.grid_y
    }

    /// Padded tile dimensions in pixels.
    pub fn tile_size(&self) -> (usize, usize) {
        (self.tile_w, self.tile_h)
    }

    pub fn luts(&self) -> &[LookupTable] {
        &self.luts
    }

    pub fn lut(&self, tx: usize, ty: usize) -> &LookupTable {
        &self.luts[ty * self.grid_x + tx]
    }

    /// Tile center along x in padded-image pixel coordinates.
    pub fn center_x(&self, tx: usize) -> f64 {
        (tx as f64 + 0.5) * self.tile_w as f64 - 0.5
    }

    /// Tile center along y in padded-image pixel coordinates.
    pub fn center_y(&self, ty: usize) -> f64 {
        (ty as f64 + 0.5) * self.tile_h as f64 - 0.5
    }
}

/// Caps every bin at `clip_limit` and spreads the removed excess back over
/// the histogram in a single pass.
///
/// The excess `E` is returned as `floor(E / 256)` to every bin plus one
/// extra count to each of bins `0 .. E % 256`, so the total count is
/// preserved exactly. Bins that were clipped may end slightly above the
/// limit; there is no iterative re-clip.
pub fn clip_and_redistribute(
    hist: &Histogram256,
    clip_limit: u32,
) -> Result<Histogram256, ClaheError> {
    if clip_limit < 1 {
        return Err(ClaheError::InvalidClipLimit);
    }
    let mut bins = *hist.bins();
    let mut excess: u64 = 0;
    for bin in bins.iter_mut() {
        if *bin > clip_limit {
            excess += u64::from(*bin - clip_limit);
            *bin = clip_limit;
        }
    }
    let per_bin = (excess / 256) as u32;
    let remainder = (excess % 256) as usize;
    for (i, bin) in bins.iter_mut().enumerate() {
        *bin += per_bin;
        if i < remainder {
            *bin += 1;
        }
    }
    Ok(Histogram256::from_bins(bins))
}

/// Pads the raster by edge replication so both dimensions divide evenly,
/// then builds one equalization table per tile.
pub fn build_tile_luts(raster: &Raster, params: &ClaheParams) -> Result<TileGrid, ClaheError> {
    let (grid_x, grid_y) = (params.grid_x, params.grid_y);
    if grid_x > raster.width() || grid_y > raster.height() {
        return Err(ClaheError::GridLargerThanImage {
            grid_x,
            grid_y,
            width: raster.width(),
            height: raster.height(),
        });
    }
    let tile_w = raster.width().div_ceil(grid_x);
    let tile_h = raster.height().div_ceil(grid_y);
    let padded = pad_replicate(raster, tile_w * grid_x, tile_h * grid_y);

    let tile_pixels = tile_w * tile_h;
    let clip_limit = params
        .clip_factor
        .map(|f| ((f * tile_pixels as f64 / 256.0).round() as u32).max(1));

    let luts: Vec<LookupTable> = (0..grid_x * grid_y)
        .into_par_iter()
        .map(|idx| {
            let (tx, ty) = (idx % grid_x, idx / grid_x);
            let region = Rect {
                x: tx * tile_w,
                y: ty * tile_h,
                width: tile_w,
                height: tile_h,
            };
            let hist = compute_histogram(&padded, Some(region)).expect("tile within padded image");
            // A single-intensity tile maps through the identity. The check
            // runs before clipping: redistribution would smear the
            // degenerate histogram over the low bins and manufacture
            // contrast where the tile has none.
            if hist.bins().iter().any(|&c| u64::from(c) == hist.total()) {
                return LookupTable::identity();
            }
            let hist = match clip_limit {
                Some(limit) => {
                    clip_and_redistribute(&hist, limit).expect("clip limit is at least 1")
                }
                None => hist,
            };
            equalize_mapping(&hist).expect("tiles are non-empty")
        })
        .collect();

    Ok(TileGrid {
        grid_x,
        grid_y,
        tile_w,
        tile_h,
        luts,
    })
}

/// Remaps every pixel by interpolating between the surrounding tiles'
/// lookup tables.
pub fn blend_tiles(raster: &Raster, grid: &TileGrid) -> Result<Raster, ClaheError> {
    let implied_w = raster.width().div_ceil(grid.grid_x);
    let implied_h = raster.height().div_ceil(grid.grid_y);
    if implied_w != grid.tile_w || implied_h != grid.tile_h {
        return Err(ClaheError::GridMismatch {
            expected_w: grid.tile_w,
            expected_h: grid.tile_h,
            got_w: implied_w,
            got_h: implied_h,
        });
    }

    let width = raster.width();
    let mut pixels = vec![0u8; width * raster.height()];
    pixels
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, out_row)| {
            let (ty_lo, ty_hi, ay) = axis_position(y, grid.tile_h, grid.grid_y);
            let row = raster.row(y);
            for (x, out) in out_row.iter_mut().enumerate() {
                let (tx_lo, tx_hi, ax) = axis_position(x, grid.tile_w, grid.grid_x);
                let v = row[x];
                let top = lerp(
                    f64::from(grid.lut(tx_lo, ty_lo).remap(v)),
                    f64::from(grid.lut(tx_hi, ty_lo).remap(v)),
                    ax,
                );
                let bottom = lerp(
                    f64::from(grid.lut(tx_lo, ty_hi).remap(v)),
                    f64::from(grid.lut(tx_hi, ty_hi).remap(v)),
                    ax,
                );
                *out = lerp(top, bottom, ay).round().clamp(0.0, 255.0) as u8;
            }
        });

    Ok(Raster::from_pixels(width, raster.height(), pixels).expect("dimensions preserved"))
}

/// Full enhancement: per-tile tables, then blended remapping.
pub fn clahe(raster: &Raster, params: &ClaheParams) -> Result<Raster, ClaheError> {
    let grid = build_tile_luts(raster, params)?;
    blend_tiles(raster, &grid)
}

/// Neighboring tile indices and interpolation weight along one axis.
///
/// The weight is the pixel's distance past the lower tile center, as a
/// fraction of the center spacing. Pixels left of the first center or
/// right of the last collapse to a single tile (weight 0), which yields
/// the 2-table strips along image borders and the 1-table corner regions.
fn axis_position(coord: usize, tile_len: usize, tiles: usize) -> (usize, usize, f64) {
    let lo = ((coord as f64 + 0.5) / tile_len as f64 - 0.5).floor();
    if lo < 0.0 {
        (0, 0, 0.0)
    } else if lo as usize >= tiles - 1 {
        (tiles - 1, tiles - 1, 0.0)
    } else {
        let lo = lo as usize;
        let center = (lo as f64 + 0.5) * tile_len as f64 - 0.5;
        (lo, lo + 1, (coord as f64 - center) / tile_len as f64)
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a * (1.0 - t) + b * t
    }
}

fn pad_replicate(raster: &Raster, padded_w: usize, padded_h: usize) -> Raster {
    if padded_w == raster.width() && padded_h == raster.height() {
        return raster.clone();
    }
    let mut pixels = Vec::with_capacity(padded_w * padded_h);
    for y in 0..padded_h {
        let sy = y.min(raster.height() - 1);
        let row = raster.row(sy);
        pixels.extend_from_slice(row);
        // replicate the rightmost column
        pixels.resize(
            pixels.len() + (padded_w - raster.width()),
            row[raster.width() - 1],
        );
    }
    Raster::from_pixels(padded_w, padded_h, pixels).expect("padded buffer sized exactly")
}
