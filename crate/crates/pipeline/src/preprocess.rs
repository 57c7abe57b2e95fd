//! Batch enhancement: writes every sample of a manifest into a class-dir
//! layout, enhanced or byte-identical.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use clahenet_core::clahe::{clahe, ClaheParams};
use clahenet_core::codec::{encode_image, EncodeFormat};
use clahenet_core::raster::Raster;

use crate::dataset::{ClassLabel, DatasetManifest, Sample, SampleSource};
use crate::PipelineError;

/// Applies CLAHE to every image (or copies unchanged when `params` is
/// `None`) and returns a manifest of the written files with labels and
/// split assignments preserved. Re-running with the same inputs rewrites
/// identical bytes.
pub fn preprocess_batch(
    manifest: &DatasetManifest,
    params: Option<&ClaheParams>,
    out_dir: &Path,
) -> Result<DatasetManifest, PipelineError> {
    for label in ClassLabel::BOTH {
        std::fs::create_dir_all(out_dir.join(label.dir_name()))
            .map_err(|e| PipelineError::Data(format!("{}: {e}", out_dir.display())))?;
    }
    let samples: Vec<Sample> = manifest
        .samples
        .par_iter()
        .map(|sample| {
            let dest = write_sample(sample, params, out_dir)?;
            Ok(Sample {
                source: SampleSource::File(dest),
                label: sample.label,
                split: sample.split,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    DatasetManifest::new(samples, manifest.provenance.clone())
}

fn write_sample(
    sample: &Sample,
    params: Option<&ClaheParams>,
    out_dir: &Path,
) -> Result<PathBuf, PipelineError> {
    let class_dir = out_dir.join(sample.label.dir_name());
    match (params, &sample.source) {
        // pass-through of an on-disk file stays byte-identical
        (None, SampleSource::File(path)) => {
            let dest = class_dir.join(sample.file_name());
            // copying a file onto itself would truncate it
            if *path != dest {
                std::fs::copy(path, &dest)
                    .map_err(|e| PipelineError::Data(format!("{}: {e}", dest.display())))?;
            }
            Ok(dest)
        }
        (None, SampleSource::Inline { name, raster }) => {
            write_raster(raster, &class_dir.join(name))
        }
        (Some(params), _) => {
            let raster = sample.load_raster()?;
            let enhanced = clahe(&raster, params).map_err(PipelineError::data)?;
            let dest = class_dir.join(enhanced_file_name(&sample.file_name()));
            write_raster(&enhanced, &dest)
        }
    }
}

/// Enhanced grayscale output keeps the source name, except that color
/// PPM sources become PGM.
fn enhanced_file_name(name: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) if ext.eq_ignore_ascii_case("ppm") => format!("{stem}.pgm"),
        _ => name.to_string(),
    }
}

fn write_raster(raster: &Raster, dest: &Path) -> Result<PathBuf, PipelineError> {
    let format = match dest.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => EncodeFormat::Png,
        _ => EncodeFormat::Pgm,
    };
    let bytes = encode_image(raster, format).map_err(PipelineError::data)?;
    std::fs::write(dest, bytes)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", dest.display())))?;
    Ok(dest.to_path_buf())
}
