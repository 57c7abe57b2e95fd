//! The two-arm experiment: train the same seeded network on raw and on
//! enhanced copies of one dataset split, evaluate both on the held-out
//! set, and emit a paired metrics report.

use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use clahenet_core::clahe::ClaheParams;
use clahenet_core::metrics::{write_report, ReportRow};
use clahenet_core::nn::{
    evaluate_classifier, save_params, tiny_vgg, train_classifier, write_loss_trace, Hyperparams,
    NnError, Sample as NnSample,
};
use clahenet_core::raster::Raster;
use clahenet_core::{Scalar, Tensor};

use crate::config::{DatasetSource, ExperimentConfig};
use crate::dataset::{split_dataset, DatasetManifest, Split};
use crate::preprocess::preprocess_batch;
use crate::synth::generate_synthetic_dataset;
use crate::{ingest_directory, PipelineError};

/// Everything an experiment leaves behind.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<ReportRow>,
    pub report_csv: PathBuf,
    pub report_json: PathBuf,
}

/// Contrast gain applied after centering; low-contrast inputs otherwise
/// leave plain SGD with gradients too small for short training runs.
const INPUT_GAIN: Scalar = 4.0;

/// Network input: resize (nearest-neighbor) to the network's spatial size
/// after any enhancement, scale to [0, 1], subtract the per-image mean,
/// and apply a fixed contrast gain. Centering keeps the first layer's
/// gradients from being dominated by the image's DC level, which
/// otherwise stalls plain SGD.
pub fn raster_to_tensor(raster: &Raster, shape: [usize; 3]) -> Result<Tensor, PipelineError> {
    let resized = raster
        .resize_nearest(shape[2], shape[1])
        .map_err(PipelineError::data)?;
    let mut data: Vec<Scalar> = resized
        .pixels()
        .iter()
        .map(|&v| Scalar::from(v) / 255.0)
        .collect();
    let mean = data.iter().sum::<Scalar>() / data.len() as Scalar;
    for v in &mut data {
        *v = (*v - mean) * INPUT_GAIN;
    }
    Tensor::new(shape.to_vec(), data).map_err(PipelineError::data)
}

/// Loads one split of a manifest as network samples.
pub fn split_samples(
    manifest: &DatasetManifest,
    split: Split,
    shape: [usize; 3],
) -> Result<Vec<NnSample<Scalar>>, PipelineError> {
    manifest
        .with_split(split)
        .map(|sample| {
            Ok(NnSample {
                input: raster_to_tensor(&sample.load_raster()?, shape)?,
                label: sample.label.index(),
            })
        })
        .collect()
}

/// One experiment arm: a name plus the preprocessing that distinguishes
/// it. Everything else (split, seeds, hyperparameters) is shared.
struct ArmPlan {
    name: &'static str,
    clahe: Option<ClaheParams>,
    hyper: Hyperparams,
    split_ratio: f64,
}

/// Digest of the arm plan minus the preprocessing field; both arms must
/// agree so the comparison isolates preprocessing.
fn shared_plan_digest(plan: &ArmPlan) -> u64 {
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    plan.hyper.learning_rate.to_bits().hash(&mut hasher);
    plan.hyper.epochs.hash(&mut hasher);
    plan.hyper.batch_size.hash(&mut hasher);
    plan.hyper.seed.hash(&mut hasher);
    plan.split_ratio.to_bits().hash(&mut hasher);
    hasher.finish()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, PipelineError> {
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", out_dir.display())))?;

    // one dataset, one split, shared by both arms
    let manifest = match &config.dataset {
        DatasetSource::Synthetic(params) => {
            let generated = generate_synthetic_dataset(params, config.seed)?;
            preprocess_batch(&generated, None, &out_dir.join("synth"))?
        }
        DatasetSource::Directory(dir) => ingest_directory(dir)?,
    };
    let manifest = split_dataset(manifest, config.split_ratio, config.seed)?;

    let hyper = Hyperparams {
        learning_rate: config.train.learning_rate,
        epochs: config.train.epochs,
        batch_size: config.train.batch_size,
        seed: config.seed,
    };
    let arms = [
        ArmPlan {
            name: "no_clahe",
            clahe: None,
            hyper,
            split_ratio: config.split_ratio,
        },
        ArmPlan {
            name: "clahe",
            clahe: Some(config.clahe),
            hyper,
            split_ratio: config.split_ratio,
        },
    ];
    assert_eq!(
        shared_plan_digest(&arms[0]),
        shared_plan_digest(&arms[1]),
        "experiment arms may differ only in preprocessing"
    );

    let mut rows = Vec::with_capacity(arms.len());
    for arm in &arms {
        rows.push(run_arm(arm, &manifest, out_dir)?);
    }

    let report_csv = out_dir.join("report.csv");
    let report_json = out_dir.join("report.json");
    write_report(&rows, &report_csv, &report_json).map_err(PipelineError::data)?;
    Ok(ExperimentOutcome {
        rows,
        report_csv,
        report_json,
    })
}

fn run_arm(
    arm: &ArmPlan,
    manifest: &DatasetManifest,
    out_dir: &Path,
) -> Result<ReportRow, PipelineError> {
    let arm_manifest = match &arm.clahe {
        Some(params) => preprocess_batch(manifest, Some(params), &out_dir.join("enhanced"))?,
        None => manifest.clone(),
    };
    let spec = tiny_vgg(arm.hyper.seed);
    let train_set = split_samples(&arm_manifest, Split::Train, spec.input_shape)?;
    let eval_set = split_samples(&arm_manifest, Split::Eval, spec.input_shape)?;

    let (model, trace) = train_classifier(&spec, &train_set, &arm.hyper).map_err(|e| match e {
        NnError::Diverged { epoch } => PipelineError::Divergence {
            arm: arm.name.to_string(),
            epoch,
        },
        other => PipelineError::data(other),
    })?;

    save_params(
        &spec,
        &model.params,
        &out_dir.join(format!("{}.model", arm.name)),
    )
    .map_err(PipelineError::data)?;
    write_loss_trace(&out_dir.join(format!("{}_loss.csv", arm.name)), &trace)
        .map_err(PipelineError::data)?;

    let (_, confusion) = evaluate_classifier(&model, &eval_set).map_err(PipelineError::data)?;
    ReportRow::from_confusion(arm.name, confusion).map_err(PipelineError::data)
}
