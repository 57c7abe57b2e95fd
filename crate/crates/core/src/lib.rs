//! Image contrast enhancement and desk-scale CNN classification.
//!
//! The crate has two halves that meet in the experiment pipeline:
//!
//! * a pixel pipeline over 8-bit grayscale rasters — PGM/PPM/PNG codecs,
//!   global histogram equalization, and tiled CLAHE with clip limiting and
//!   bilinear blending of per-tile lookup tables;
//! * real-valued numerics generic over the scalar type ([`Real`], `f32` or
//!   `f64`) — a small convolutional network trained from scratch with plain
//!   SGD, finite-difference gradient verification, and the confusion-matrix
//!   scores used to compare classifiers.
//!
//! All randomized steps are seeded and bit-deterministic; enhancement output
//! is bit-identical regardless of thread count.

pub mod clahe;
pub mod codec;
pub mod histogram;
pub mod metrics;
pub mod nn;
pub mod raster;

pub use clahe::{ClaheParams, TileGrid};
pub use histogram::{Histogram256, LookupTable};
pub use metrics::{ConfusionMatrix, MetricsRow, ReportRow};
pub use nn::Real;
pub use raster::{Raster, Rect, RgbRaster};

/// Scalar type used by the shipped pipeline. Training and evaluation run in
/// double precision; the generic code paths stay usable with `f32`.
pub type Scalar = f64;

/// Dense tensor over the pipeline scalar.
pub type Tensor = nn::Tensor<Scalar>;
