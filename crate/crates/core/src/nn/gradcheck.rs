//! Finite-difference verification of the backward pass.

use super::network::{loss_and_gradients, sample_loss, NetworkParams, NetworkSpec};
use super::{NnError, Real, Tensor};

/// Deliberate corruption of the analytic gradients, used to confirm the
/// check itself is sensitive to a broken backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardFault {
    None,
    /// Negates every analytic gradient.
    SignFlip,
}

/// Compares every parameter's analytic gradient against central finite
/// differences of the loss and returns the maximum relative error
/// `|a - n| / max(|a|, |n|, 1e-12)`.
///
/// Parameters are initialized from the spec's seed; `epsilon` must lie in
/// `(1e-7, 1e-3)`.
pub fn gradient_check<F: Real>(
    spec: &NetworkSpec,
    input: &Tensor<F>,
    label: usize,
    epsilon: f64,
) -> Result<f64, NnError> {
    gradient_check_with_fault(spec, input, label, epsilon, BackwardFault::None)
}

/// [`gradient_check`] with an optional injected backward-pass fault.
pub fn gradient_check_with_fault<F: Real>(
    spec: &NetworkSpec,
    input: &Tensor<F>,
    label: usize,
    epsilon: f64,
    fault: BackwardFault,
) -> Result<f64, NnError> {
    if !(epsilon > 1e-7 && epsilon < 1e-3) {
        return Err(NnError::InvalidEpsilon(epsilon));
    }
    let mut params = NetworkParams::<F>::init_he_uniform(spec)?;
    let (loss, mut analytic) = loss_and_gradients(spec, &params, input, label)?;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("gradient check loss".into()));
    }
    if fault == BackwardFault::SignFlip {
        analytic.scale(-F::one());
    }

    let eps = F::from_f64(epsilon).expect("epsilon representable");
    let mut max_rel = 0.0f64;
    for idx in 0..spec.layers.len() {
        if analytic.layer(idx).is_none() {
            continue;
        }
        for part in [Part::Weights, Part::Bias] {
            let len = part.of(analytic.layer(idx).expect("checked")).len();
            for i in 0..len {
                let original = part.of(params.layer(idx).expect("same layout")).data()[i];

                part.of_mut(&mut params, idx).data_mut()[i] = original + eps;
                let plus = sample_loss(spec, &params, input, label)?;
                part.of_mut(&mut params, idx).data_mut()[i] = original - eps;
                let minus = sample_loss(spec, &params, input, label)?;
                part.of_mut(&mut params, idx).data_mut()[i] = original;

                let (plus, minus) = (to_f64(plus)?, to_f64(minus)?);
                let numeric = (plus - minus) / (2.0 * epsilon);
                let a = to_f64(part.of(analytic.layer(idx).expect("checked")).data()[i])?;
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
                if rel > max_rel {
                    max_rel = rel;
                }
            }
        }
    }
    Ok(max_rel)
}

fn to_f64<F: Real>(v: F) -> Result<f64, NnError> {
    let x = v.to_f64().expect("scalar converts to f64");
    if x.is_finite() {
        Ok(x)
    } else {
        Err(NnError::NonFinite("gradient check loss".into()))
    }
}

#[derive(Clone, Copy)]
enum Part {
    Weights,
    Bias,
}

impl Part {
    fn of<F>(self, layer: &super::network::LayerParams<F>) -> &Tensor<F> {
        match self {
            Part::Weights => &layer.weights,
            Part::Bias => &layer.bias,
        }
    }

    fn of_mut<F: Real>(self, params: &mut NetworkParams<F>, idx: usize) -> &mut Tensor<F> {
        let layer = params.layers_mut()[idx].as_mut().expect("parameterized");
        match self {
            Part::Weights => &mut layer.weights,
            Part::Bias => &mut layer.bias,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::LayerSpec;

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            input_shape: [1, 4, 4],
            layers: vec![
                LayerSpec::Conv {
                    out_channels: 2,
                    kernel: 3,
                },
                LayerSpec::Relu,
                LayerSpec::FullyConnected { units: 2 },
                LayerSpec::SoftmaxOutput,
            ],
            seed: 99,
        }
    }

    fn sample_input() -> Tensor<f64> {
        let data: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        Tensor::new(vec![1, 4, 4], data).unwrap()
    }

    #[test]
    fn epsilon_range_is_enforced() {
        let spec = small_spec();
        let input = sample_input();
        assert!(matches!(
            gradient_check(&spec, &input, 0, 1e-2),
            Err(NnError::InvalidEpsilon(_))
        ));
        assert!(matches!(
            gradient_check(&spec, &input, 0, 1e-8),
            Err(NnError::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn small_network_passes_the_check() {
        let err = gradient_check(&small_spec(), &sample_input(), 1, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn sign_flip_is_detected() {
        let err = gradient_check_with_fault(
            &small_spec(),
            &sample_input(),
            1,
            1e-5,
            BackwardFault::SignFlip,
        )
        .unwrap();
        assert!(err > 1e-1, "fault injection went unnoticed: {err}");
    }
}
