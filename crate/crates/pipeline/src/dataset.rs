//! Labeled sample manifests: ingestion from a directory-per-class layout
//! and seeded stratified train/eval splitting.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clahenet_core::codec::decode_image;
use clahenet_core::raster::Raster;

use crate::synth::SynthParams;
use crate::PipelineError;

pub const IMAGE_EXTENSIONS: [&str; 3] = ["pgm", "ppm", "png"];

/// Binary class labels; class 1 ("diseased") is the positive class
/// throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Healthy,
    Diseased,
}

impl ClassLabel {
    pub const BOTH: [ClassLabel; 2] = [ClassLabel::Healthy, ClassLabel::Diseased];

    pub fn index(self) -> usize {
        match self {
            ClassLabel::Healthy => 0,
            ClassLabel::Diseased => 1,
        }
    }

    /// Directory name in the on-disk layout.
    pub fn dir_name(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "healthy",
            ClassLabel::Diseased => "diseased",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

/// Where a sample's pixels live.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSource {
    File(PathBuf),
    Inline { name: String, raster: Raster },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub source: SampleSource,
    pub label: ClassLabel,
    pub split: Option<Split>,
}

impl Sample {
    /// File name used when the sample is written out.
    pub fn file_name(&self) -> String {
        match &self.source {
            SampleSource::File(path) => path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sample".into()),
            SampleSource::Inline { name, .. } => name.clone(),
        }
    }

    /// Decodes the sample into the canonical grayscale raster (color
    /// sources go through luma conversion).
    pub fn load_raster(&self) -> Result<Raster, PipelineError> {
        match &self.source {
            SampleSource::File(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
                let decoded = decode_image(&bytes, None)
                    .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
                Ok(decoded.into_luma())
            }
            SampleSource::Inline { raster, .. } => Ok(raster.clone()),
        }
    }
}

/// How a manifest came to be.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Ingested { root: PathBuf },
    Synthetic { seed: u64, params: SynthParams },
}

/// The dataset: ordered samples with labels and (after splitting) a
/// train/eval assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl DatasetManifest {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self, PipelineError> {
        for label in ClassLabel::BOTH {
            if !samples.iter().any(|s| s.label == label) {
                return Err(PipelineError::Data(format!(
                    "dataset has no {} samples; both classes are required",
                    label.dir_name()
                )));
            }
        }
        Ok(Self {
            samples,
            provenance,
        })
    }

    pub fn class_count(&self, label: ClassLabel) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn with_split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == Some(split))
    }
}

/// Builds a manifest from `root/healthy` and `root/diseased`.
///
/// Ordering is deterministic: all healthy samples first, lexicographic by
/// path within each class. Every candidate image is decoded once up front
/// so unreadable files fail here rather than mid-pipeline.
pub fn ingest_directory(root: &Path) -> Result<DatasetManifest, PipelineError> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for label in ClassLabel::BOTH {
        let dir = root.join(label.dir_name());
        if !dir.is_dir() {
            return Err(PipelineError::Data(format!(
                "missing class directory {}",
                dir.display()
            )));
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && has_image_extension(p))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(PipelineError::Data(format!(
                "no decodable images in {}",
                dir.display()
            )));
        }
        for path in paths {
            if !seen.insert(path.clone()) {
                return Err(PipelineError::Data(format!(
                    "duplicate sample path {}",
                    path.display()
                )));
            }
            let sample = Sample {
                source: SampleSource::File(path),
                label,
                split: None,
            };
            // decode now so errors surface with the offending path
            sample.load_raster()?;
            samples.push(sample);
        }
    }
    DatasetManifest::new(
        samples,
        Provenance::Ingested {
            root: root.to_path_buf(),
        },
    )
}

/// True for the image extensions the pipeline ingests.
pub fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let lower = e.to_ascii_lowercase();
            IMAGE_EXTENSIONS.contains(&lower.as_str())
        })
        .unwrap_or(false)
}

/// Stratified split: `floor(ratio * n)` of each class to train, the rest
/// to eval, assignment a pure function of the seed.
pub fn split_dataset(
    manifest: DatasetManifest,
    ratio: f64,
    seed: u64,
) -> Result<DatasetManifest, PipelineError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PipelineError::Usage(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut manifest = manifest;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in ClassLabel::BOTH {
        let mut indices: Vec<usize> = manifest
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == label)
            .map(|(i, _)| i)
            .collect();
        if indices.len() < 2 {
            return Err(PipelineError::Data(format!(
                "class {} has {} samples; at least 2 are required to split",
                label.dir_name(),
                indices.len()
            )));
        }
        indices.shuffle(&mut rng);
        let train_count = (ratio * indices.len() as f64).floor() as usize;
        for (rank, &i) in indices.iter().enumerate() {
            manifest.samples[i].split = Some(if rank < train_count {
                Split::Train
            } else {
                Split::Eval
            });
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clahenet_core::codec::{encode_image, EncodeFormat};

    fn write_class_images(root: &Path, label: ClassLabel, count: usize) {
        let dir = root.join(label.dir_name());
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..count {
            let raster = Raster::filled(4, 4, (40 * i + label.index() * 9) as u8).unwrap();
            let bytes = encode_image(&raster, EncodeFormat::Pgm).unwrap();
            std::fs::write(dir.join(format!("img_{i}.pgm")), bytes).unwrap();
        }
    }

    #[test]
    fn ingest_orders_healthy_then_diseased_lexicographically() {
        let dir = tempfile::tempdir().unwrap();
        write_class_images(dir.path(), ClassLabel::Healthy, 3);
        write_class_images(dir.path(), ClassLabel::Diseased, 2);
        let manifest = ingest_directory(dir.path()).unwrap();
        let labels: Vec<usize> = manifest.samples.iter().map(|s| s.label.index()).collect();
        assert_eq!(labels, vec![0, 0, 0, 1, 1]);
        let names: Vec<String> = manifest.samples.iter().map(|s| s.file_name()).collect();
        assert_eq!(names[0], "img_0.pgm");
        assert_eq!(names[1], "img_1.pgm");

        // determinism
        let again = ingest_directory(dir.path()).unwrap();
        assert_eq!(manifest, again);
    }

    #[test]
    fn ingest_requires_both_classes() {
        let dir = tempfile::tempdir().unwrap();
        write_class_images(dir.path(), ClassLabel::Healthy, 2);
        // diseased/ missing entirely
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(PipelineError::Data(_))
        ));
        // present but empty
        std::fs::create_dir_all(dir.path().join("diseased")).unwrap();
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(PipelineError::Data(_))
        ));
    }

    #[test]
    fn color_images_ingest_through_luma() {
        let dir = tempfile::tempdir().unwrap();
        write_class_images(dir.path(), ClassLabel::Healthy, 1);
        let diseased = dir.path().join("diseased");
        std::fs::create_dir_all(&diseased).unwrap();
        // pure red 1x2 PPM: luma = round(0.299 * 255) = 76
        std::fs::write(
            diseased.join("red.ppm"),
            b"P6\n1 2\n255\n\xff\x00\x00\xff\x00\x00",
        )
        .unwrap();
        let manifest = ingest_directory(dir.path()).unwrap();
        let red = manifest
            .samples
            .iter()
            .find(|s| s.label == ClassLabel::Diseased)
            .unwrap();
        assert_eq!(red.load_raster().unwrap().pixels(), &[76, 76]);
    }

    #[test]
    fn ingest_rejects_undecodable_images() {
        let dir = tempfile::tempdir().unwrap();
        write_class_images(dir.path(), ClassLabel::Healthy, 1);
        write_class_images(dir.path(), ClassLabel::Diseased, 1);
        std::fs::write(dir.path().join("healthy/broken.pgm"), b"P5\n2 2\n255\n\x00").unwrap();
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(PipelineError::Data(_))
        ));
    }

    #[test]
    fn split_is_stratified_disjoint_and_seeded() {
        let dir = tempfile::tempdir().unwrap();
        write_class_images(dir.path(), ClassLabel::Healthy, 50);
        write_class_images(dir.path(), ClassLabel::Diseased, 50);
        let manifest = ingest_directory(dir.path()).unwrap();
        let split = split_dataset(manifest.clone(), 0.8, 7).unwrap();

        let train: Vec<&Sample> = split.with_split(Split::Train).collect();
        let eval: Vec<&Sample> = split.with_split(Split::Eval).collect();
        assert_eq!(train.len(), 80);
        assert_eq!(eval.len(), 20);
        for label in ClassLabel::BOTH {
            assert_eq!(train.iter().filter(|s| s.label == label).count(), 40);
            assert_eq!(eval.iter().filter(|s| s.label == label).count(), 10);
        }
        // every sample is assigned exactly one side
        assert!(split.samples.iter().all(|s| s.split.is_some()));

        let again = split_dataset(manifest.clone(), 0.8, 7).unwrap();
        assert_eq!(split, again);
        let other_seed = split_dataset(manifest, 0.8, 8).unwrap();
        assert_ne!(split, other_seed);
    }

    #[test]
    fn split_validates_inputs() {
        let dir = tempfile::tempdir().unwrap();
        write_class_images(dir.path(), ClassLabel::Healthy, 2);
        write_class_images(dir.path(), ClassLabel::Diseased, 1);
        let manifest = ingest_directory(dir.path()).unwrap();
        assert!(matches!(
            split_dataset(manifest.clone(), 1.5, 0),
            Err(PipelineError::Usage(_))
        ));
        assert!(matches!(
            split_dataset(manifest, 0.5, 0),
            Err(PipelineError::Data(_))
        ));
    }
}
