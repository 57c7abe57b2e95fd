//! Intensity histograms and CDF-based global histogram equalization.
//!
//! Equalization maps the lowest occupied bin to 0 and stretches the
//! cumulative distribution over the full 8-bit range:
//!
//! ```text
//! map[v] = round(255 * (cdf(v) - cdf_min) / (N - cdf_min))
//! ```
//!
//! where `cdf_min` is the smallest nonzero CDF value. A histogram with all
//! mass in one bin degenerates to the identity map, so equalizing a constant
//! image leaves it unchanged.

use thiserror::Error;

use crate::raster::{Raster, RasterError, Rect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistogramError {
    #[error("histogram is empty (no counted pixels)")]
    Empty,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    bins: [u32; 256],
}

impl Histogram256 {
    pub fn from_bins(bins: [u32; 256]) -> Self {
        Self { bins }
    }

    pub fn bins(&self) -> &[u32; 256] {
        &self.bins
    }

    pub fn count(&self, value: u8) -> u32 {
        self.bins[value as usize]
    }

    /// Total number of counted pixels.
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|&c| u64::from(c)).sum()
    }
}

/// 256-entry intensity remapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    map: [u8; 256],
}

impl LookupTable {
    pub fn from_map(map: [u8; 256]) -> Self {
        Self { map }
    }

    pub fn identity() -> Self {
        let mut map = [0u8; 256];
        for (v, entry) in map.iter_mut().enumerate() {
            *entry = v as u8;
        }
        Self { map }
    }

    pub fn map(&self) -> &[u8; 256] {
        &self.map
    }

    #[inline]
    pub fn remap(&self, value: u8) -> u8 {
        self.map[value as usize]
    }

    pub fn is_monotone(&self) -> bool {
        self.map.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Counts intensities inside `region` (whole image when `None`).
pub fn compute_histogram(
    raster: &Raster,
    region: Option<Rect>,
) -> Result<Histogram256, HistogramError> {
    let region = match region {
        Some(r) => {
            r.check_within(raster)?;
            r
        }
        None => Rect::of(raster),
    };
    let mut bins = [0u32; 256];
    for y in region.y..region.y + region.height {
        for &v in &raster.row(y)[region.x..region.x + region.width] {
            bins[v as usize] += 1;
        }
    }
    Ok(Histogram256 { bins })
}

/// Builds the equalization lookup table for a histogram.
///
/// Errors on an empty histogram. When every counted pixel sits in a single
/// bin (`N == cdf_min`) the map is the identity.
pub fn equalize_mapping(hist: &Histogram256) -> Result<LookupTable, HistogramError> {
    let total = hist.total();
    if total == 0 {
        return Err(HistogramError::Empty);
    }
    let cdf_min = {
        let mut acc = 0u64;
        let mut first = 0u64;
        for &c in hist.bins().iter() {
            acc += u64::from(c);
            if acc > 0 {
                first = acc;
                break;
            }
        }
        first
    };
    if total == cdf_min {
        return Ok(LookupTable::identity());
    }
    let denom = (total - cdf_min) as f64;
    let mut map = [0u8; 256];
    let mut cdf = 0u64;
    for (v, entry) in map.iter_mut().enumerate() {
        cdf += u64::from(hist.bins()[v]);
        let scaled = 255.0 * (cdf as f64 - cdf_min as f64) / denom;
        *entry = scaled.round().clamp(0.0, 255.0) as u8;
    }
    Ok(LookupTable { map })
}

/// Remaps every pixel through the lookup table.
pub fn apply_lut(raster: &Raster, lut: &LookupTable) -> Raster {
    let pixels = raster.pixels().iter().map(|&v| lut.remap(v)).collect();
    Raster::from_pixels(raster.width(), raster.height(), pixels).expect("dimensions unchanged")
}

/// Global histogram equalization of a whole raster.
pub fn equalize(raster: &Raster) -> Raster {
    let hist = compute_histogram(raster, None).expect("whole-image region");
    let lut = equalize_mapping(&hist).expect("non-empty raster");
    apply_lut(raster, &lut)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist_of(pixels: &[u8]) -> Histogram256 {
        let raster = Raster::from_pixels(pixels.len(), 1, pixels.to_vec()).unwrap();
        compute_histogram(&raster, None).unwrap()
    }

    #[test]
    fn histogram_counts_directly() {
        let r = Raster::from_pixels(2, 2, vec![0, 0, 128, 255]).unwrap();
        let h = compute_histogram(&r, None).unwrap();
        assert_eq!(h.count(0), 2);
        assert_eq!(h.count(128), 1);
        assert_eq!(h.count(255), 1);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn histogram_of_constant_raster() {
        let r = Raster::filled(3, 3, 7).unwrap();
        let h = compute_histogram(&r, None).unwrap();
        assert_eq!(h.count(7), 9);
        assert_eq!(h.total(), 9);
    }

    #[test]
    fn histogram_respects_region() {
        let r = Raster::from_pixels(2, 2, vec![1, 2, 3, 4]).unwrap();
        let region = Rect {
            x: 1,
            y: 0,
            width: 1,
            height: 2,
        };
        let h = compute_histogram(&r, Some(region)).unwrap();
        assert_eq!(h.count(2), 1);
        assert_eq!(h.count(4), 1);
        assert_eq!(h.total(), 2);

        let oob = Rect {
            x: 1,
            y: 1,
            width: 2,
            height: 1,
        };
        assert!(compute_histogram(&r, Some(oob)).is_err());
    }

    #[test]
    fn equalize_mapping_matches_hand_computation() {
        // N = 4, cdf_min = 2: map[0] = 0, map[128] = round(127.5) = 128,
        // map[255] = 255
        let lut = equalize_mapping(&hist_of(&[0, 0, 128, 255])).unwrap();
        assert_eq!(lut.remap(0), 0);
        assert_eq!(lut.remap(128), 128);
        assert_eq!(lut.remap(255), 255);
        assert!(lut.is_monotone());
    }

    #[test]
    fn single_bin_degenerates_to_identity() {
        let lut = equalize_mapping(&hist_of(&[42, 42, 42])).unwrap();
        assert_eq!(lut, LookupTable::identity());
    }

    #[test]
    fn empty_histogram_is_an_error() {
        let empty = Histogram256::from_bins([0; 256]);
        assert_eq!(equalize_mapping(&empty).unwrap_err(), HistogramError::Empty);
    }

    #[test]
    fn uniform_histogram_is_near_identity() {
        let uniform = Histogram256::from_bins([3; 256]);
        let lut = equalize_mapping(&uniform).unwrap();
        for v in 0..=255u8 {
            let diff = (i32::from(lut.remap(v)) - i32::from(v)).abs();
            assert!(diff <= 1, "map[{v}] = {} deviates by {diff}", lut.remap(v));
        }
    }

    #[test]
    fn apply_lut_identity_and_constant() {
        let r = Raster::from_pixels(2, 2, vec![5, 9, 200, 255]).unwrap();
        assert_eq!(apply_lut(&r, &LookupTable::identity()), r);
        let all_nine = LookupTable::from_map([9; 256]);
        assert_eq!(apply_lut(&r, &all_nine).pixels(), &[9, 9, 9, 9]);
    }
}
