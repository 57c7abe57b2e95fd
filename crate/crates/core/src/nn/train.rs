//! Plain SGD training and held-out evaluation.
//!
//! Everything is a pure function of (spec, dataset, hyperparameters):
//! initialization comes from the spec's seed, the shuffle order from the
//! hyperparameter seed, and updates are applied by a single writer, so two
//! runs with the same inputs produce bit-identical parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{loss_and_gradients, predict, NetworkParams, NetworkSpec};
use super::{real, NnError, Real, Tensor};
use crate::metrics::{tally_confusion, ConfusionMatrix};

/// One training or evaluation example.
#[derive(Debug, Clone)]
pub struct Sample<F> {
    pub input: Tensor<F>,
    pub label: usize,
}

/// SGD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// A spec together with trained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<F> {
    pub spec: NetworkSpec,
    pub params: NetworkParams<F>,
}

/// Trains with mini-batch SGD and returns the model plus the per-epoch
/// mean loss trace.
///
/// Aborts with [`NnError::Diverged`] (carrying the epoch index) as soon as
/// a non-finite loss appears.
pub fn train_classifier<F: Real>(
    spec: &NetworkSpec,
    samples: &[Sample<F>],
    hyper: &Hyperparams,
) -> Result<(TrainedModel<F>, Vec<f64>), NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let classes = spec.class_count()?;
    for sample in samples {
        if sample.label >= classes {
            return Err(NnError::ClassOutOfRange {
                index: sample.label,
                classes,
            });
        }
    }
    let batch_size = hyper.batch_size.max(1);
    let lr = real::<F>(hyper.learning_rate);

    let mut params = NetworkParams::init_he_uniform(spec)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(batch_size) {
            let mut batch_grads = NetworkParams::zeros_like(spec)?;
            let mut batch_loss = F::zero();
            for &i in batch {
                let (loss, grads) =
                    loss_and_gradients(spec, &params, &samples[i].input, samples[i].label)?;
                batch_loss += loss;
                batch_grads.accumulate(&grads);
            }
            if !batch_loss.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            let inv = F::one() / real::<F>(batch.len() as f64);
            batch_grads.scale(inv);
            params.step(&batch_grads, lr);
            epoch_loss += batch_loss.to_f64().expect("finite loss");
        }
        trace.push(epoch_loss / samples.len() as f64);
    }

    Ok((
        TrainedModel {
            spec: spec.clone(),
            params,
        },
        trace,
    ))
}

/// Per-sample argmax predictions plus the confusion matrix with class 1
/// as positive.
pub fn evaluate_classifier<F: Real>(
    model: &TrainedModel<F>,
    samples: &[Sample<F>],
) -> Result<(Vec<usize>, ConfusionMatrix), NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut predictions = Vec::with_capacity(samples.len());
    for sample in samples {
        let (class, _) = predict(&model.spec, &model.params, &sample.input)?;
        predictions.push(class);
    }
    let truths: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let confusion = tally_confusion(&predictions, &truths, &1).expect("non-empty, equal length");
    Ok((predictions, confusion))
}
