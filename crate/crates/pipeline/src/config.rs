//! Experiment configuration: a flat `key = value` text document.
//!
//! Recognized keys (defaults in parentheses):
//!
//! ```text
//! dataset.source    synthetic | directory        (synthetic)
//! dataset.dir       path, directory source only
//! dataset.per_class images per class             (100)
//! dataset.size      synthetic image edge         (64)
//! dataset.gap       foreground contrast gap      (30)
//! dataset.noise     pixel noise amplitude        (4)
//! dataset.split     train fraction               (0.8)
//! clahe.tiles       GXxGY                        (8x8)
//! clahe.clip        factor or "none"             (2.0)
//! train.epochs                                   (30)
//! train.lr                                       (0.1)
//! train.batch                                    (16)
//! seed                                           (7)
//! output_dir        required
//! ```
//!
//! Lines starting with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clahenet_core::clahe::ClaheParams;

use crate::synth::SynthParams;
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SynthParams),
    Directory(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub split_ratio: f64,
    pub clahe: ClaheParams,
    pub train: TrainSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
}

pub const DEFAULT_SPLIT: f64 = 0.8;
pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_BATCH: usize = 16;
pub const DEFAULT_SEED: u64 = 7;

impl ExperimentConfig {
    /// Parses the flat key-value document.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut keys: BTreeMap<String, String> = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Usage(format!(
                    "config line {}: expected `key = value`, got {raw:?}",
                    number + 1
                )));
            };
            keys.insert(key.trim().to_string(), value.trim().to_string());
        }

        let mut take = |key: &str| keys.remove(key);
        let source_kind = take("dataset.source").unwrap_or_else(|| "synthetic".into());
        let dataset = match source_kind.as_str() {
            "synthetic" => DatasetSource::Synthetic(SynthParams {
                per_class: parse_field(take("dataset.per_class"), "dataset.per_class", 100)?,
                size: parse_field(take("dataset.size"), "dataset.size", 64)?,
                contrast_gap: parse_field(take("dataset.gap"), "dataset.gap", 30.0)?,
                noise: parse_field(take("dataset.noise"), "dataset.noise", 4.0)?,
            }),
            "directory" => {
                let dir = take("dataset.dir").ok_or_else(|| {
                    PipelineError::Usage("directory source requires dataset.dir".into())
                })?;
                DatasetSource::Directory(PathBuf::from(dir))
            }
            other => {
                return Err(PipelineError::Usage(format!(
                    "dataset.source must be synthetic or directory, got {other:?}"
                )))
            }
        };

        let tiles = take("clahe.tiles").unwrap_or_else(|| "8x8".into());
        let (grid_x, grid_y) = parse_tiles(&tiles)?;
        let clip = parse_clip(&take("clahe.clip").unwrap_or_else(|| "2.0".into()))?;
        let clahe = ClaheParams::new(grid_x, grid_y, clip)
            .map_err(|e| PipelineError::Usage(e.to_string()))?;

        let config = ExperimentConfig {
            dataset,
            split_ratio: parse_field(take("dataset.split"), "dataset.split", DEFAULT_SPLIT)?,
            clahe,
            train: TrainSettings {
                epochs: parse_field(take("train.epochs"), "train.epochs", DEFAULT_EPOCHS)?,
                learning_rate: parse_field(take("train.lr"), "train.lr", DEFAULT_LEARNING_RATE)?,
                batch_size: parse_field(take("train.batch"), "train.batch", DEFAULT_BATCH)?,
            },
            seed: parse_field(take("seed"), "seed", DEFAULT_SEED)?,
            output_dir: PathBuf::from(
                take("output_dir")
                    .ok_or_else(|| PipelineError::Usage("config must set output_dir".into()))?,
            ),
        };

        if let Some(unknown) = keys.keys().next() {
            return Err(PipelineError::Usage(format!(
                "unknown config key {unknown:?}"
            )));
        }
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

fn parse_field<T: std::str::FromStr>(
    value: Option<String>,
    key: &str,
    default: T,
) -> Result<T, PipelineError> {
    match value {
        None => Ok(default),
        Some(text) => text
            .parse()
            .map_err(|_| PipelineError::Usage(format!("bad value {text:?} for {key}"))),
    }
}

/// Parses a `GXxGY` tile grid, e.g. `8x8`.
pub fn parse_tiles(text: &str) -> Result<(usize, usize), PipelineError> {
    let bad = || PipelineError::Usage(format!("tiles must look like 8x8, got {text:?}"));
    let (gx, gy) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let gx = gx.trim().parse().map_err(|_| bad())?;
    let gy = gy.trim().parse().map_err(|_| bad())?;
    Ok((gx, gy))
}

/// Parses a clip factor: a positive number or `none` for unlimited.
pub fn parse_clip(text: &str) -> Result<Option<f64>, PipelineError> {
    if text.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let value: f64 = text.parse().map_err(|_| {
        PipelineError::Usage(format!("clip must be a number or none, got {text:?}"))
    })?;
    Ok(Some(value))
}
