//! Declarative network architecture, shape propagation, parameter
//! initialization, and the composed forward/backward pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    conv2d_backward, conv2d_forward, fully_connected_backward, fully_connected_forward,
    maxpool2_backward, maxpool2_forward, relu_backward, relu_forward, softmax,
    softmax_cross_entropy, zero_pad_backward, zero_pad_forward,
};
use super::{real, NnError, Real, Tensor};

/// One layer of a [`NetworkSpec`]. Convolutions are stride-1 valid; "same"
/// spatial size is expressed with an explicit [`LayerSpec::ZeroPad`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize },
    ZeroPad { pad: usize },
    Relu,
    MaxPool2,
    FullyConnected { units: usize },
    SoftmaxOutput,
}

/// Ordered layer list with its input shape and parameter seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

impl NetworkSpec {
    /// Number of classes produced by the terminal softmax.
    pub fn class_count(&self) -> Result<usize, NnError> {
        let shapes = propagate_shapes(self)?;
        Ok(shapes.last().expect("at least the input shape")[0])
    }
}

/// Runs shape inference through every layer.
///
/// Returns the input shape followed by each layer's output shape, and
/// rejects inconsistent chaining (kernel larger than the feature map, odd
/// dimensions into pooling, a softmax that is not last, ...).
pub fn propagate_shapes(spec: &NetworkSpec) -> Result<Vec<Vec<usize>>, NnError> {
    let mut shapes: Vec<Vec<usize>> = vec![spec.input_shape.to_vec()];
    if spec.input_shape.contains(&0) {
        return Err(NnError::InvalidSpec(format!(
            "input shape {:?} has a zero dimension",
            spec.input_shape
        )));
    }
    for (idx, layer) in spec.layers.iter().enumerate() {
        let current = shapes.last().expect("non-empty").clone();
        let next = match layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => {
                let [_, h, w] = spatial(&current, idx, "conv")?;
                if *out_channels == 0 || *kernel == 0 {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: conv parameters must be positive"
                    )));
                }
                if *kernel > h || *kernel > w {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: kernel {kernel} exceeds feature map {h}x{w}"
                    )));
                }
                vec![*out_channels, h - kernel + 1, w - kernel + 1]
            }
            LayerSpec::ZeroPad { pad } => {
                let [c, h, w] = spatial(&current, idx, "zero pad")?;
                vec![c, h + 2 * pad, w + 2 * pad]
            }
            LayerSpec::Relu => current,
            LayerSpec::MaxPool2 => {
                let [c, h, w] = spatial(&current, idx, "maxpool")?;
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: maxpool needs even dimensions, got {h}x{w}"
                    )));
                }
                vec![c, h / 2, w / 2]
            }
            LayerSpec::FullyConnected { units } => {
                if *units == 0 {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: fully connected units must be positive"
                    )));
                }
                vec![*units]
            }
            LayerSpec::SoftmaxOutput => {
                if idx != spec.layers.len() - 1 {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: softmax output must be the final layer"
                    )));
                }
                if current.len() != 1 || current[0] < 2 {
                    return Err(NnError::InvalidSpec(format!(
                        "layer {idx}: softmax needs a flat input of at least 2 classes, got {current:?}"
                    )));
                }
                current
            }
        };
        shapes.push(next);
    }
    Ok(shapes)
}

fn spatial(shape: &[usize], idx: usize, what: &str) -> Result<[usize; 3], NnError> {
    match shape {
        [c, h, w] => Ok([*c, *h, *w]),
        other => Err(NnError::InvalidSpec(format!(
            "layer {idx}: {what} needs a [C, H, W] input, got {other:?}"
        ))),
    }
}

/// Total trainable parameter count: `(k*k*c_in + 1) * c_out` per
/// convolution and `(n_in + 1) * n_out` per fully connected layer.
pub fn count_params(spec: &NetworkSpec) -> Result<u64, NnError> {
    let shapes = propagate_shapes(spec)?;
    let mut total = 0u64;
    for (layer, input_shape) in spec.layers.iter().zip(&shapes) {
        total += match layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => {
                let c_in = input_shape[0] as u64;
                (kernel.pow(2) as u64 * c_in + 1) * *out_channels as u64
            }
            LayerSpec::FullyConnected { units } => {
                let n_in: usize = input_shape.iter().product();
                (n_in as u64 + 1) * *units as u64
            }
            _ => 0,
        };
    }
    Ok(total)
}

/// Weights and bias of one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Parameter set aligned with a spec's layer list (`None` for layers
/// without parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<F> {
    layers: Vec<Option<LayerParams<F>>>,
}

impl<F: Real> NetworkParams<F> {
    /// He-uniform initialization: weights drawn from
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))` with zero biases, in layer
    /// order from a ChaCha stream seeded by `spec.seed`.
    pub fn init_he_uniform(spec: &NetworkSpec) -> Result<Self, NnError> {
        let shapes = propagate_shapes(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (layer, input_shape) in spec.layers.iter().zip(&shapes) {
            layers.push(match layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                } => {
                    let c_in = input_shape[0];
                    let fan_in = c_in * kernel * kernel;
                    let shape = vec![*out_channels, c_in, *kernel, *kernel];
                    Some(init_layer(&mut rng, shape, vec![*out_channels], fan_in))
                }
                LayerSpec::FullyConnected { units } => {
                    let n_in: usize = input_shape.iter().product();
                    Some(init_layer(&mut rng, vec![*units, n_in], vec![*units], n_in))
                }
                _ => None,
            });
        }
        Ok(Self { layers })
    }

    pub fn zeros_like(spec: &NetworkSpec) -> Result<Self, NnError> {
        let shapes = propagate_shapes(spec)?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (layer, input_shape) in spec.layers.iter().zip(&shapes) {
            layers.push(match layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                } => Some(LayerParams {
                    weights: Tensor::zeros(vec![*out_channels, input_shape[0], *kernel, *kernel]),
                    bias: Tensor::zeros(vec![*out_channels]),
                }),
                LayerSpec::FullyConnected { units } => {
                    let n_in: usize = input_shape.iter().product();
                    Some(LayerParams {
                        weights: Tensor::zeros(vec![*units, n_in]),
                        bias: Tensor::zeros(vec![*units]),
                    })
                }
                _ => None,
            });
        }
        Ok(Self { layers })
    }

    pub fn layer(&self, idx: usize) -> Option<&LayerParams<F>> {
        self.layers[idx].as_ref()
    }

    pub fn layers(&self) -> &[Option<LayerParams<F>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Option<LayerParams<F>>] {
        &mut self.layers
    }

    /// SGD step: `theta <- theta - lr * grad`.
    pub fn step(&mut self, grads: &NetworkParams<F>, learning_rate: F) {
        for (param, grad) in self.layers.iter_mut().zip(&grads.layers) {
            if let (Some(p), Some(g)) = (param.as_mut(), grad.as_ref()) {
                for (w, gw) in p.weights.data_mut().iter_mut().zip(g.weights.data()) {
                    *w -= learning_rate * *gw;
                }
                for (b, gb) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
                    *b -= learning_rate * *gb;
                }
            }
        }
    }

    /// Adds `other`'s gradients into this accumulator.
    pub fn accumulate(&mut self, other: &NetworkParams<F>) {
        for (acc, add) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(o)) = (acc.as_mut(), add.as_ref()) {
                for (w, ow) in a.weights.data_mut().iter_mut().zip(o.weights.data()) {
                    *w += *ow;
                }
                for (b, ob) in a.bias.data_mut().iter_mut().zip(o.bias.data()) {
                    *b += *ob;
                }
            }
        }
    }

    /// Scales every gradient, e.g. by `1 / batch_size`.
    pub fn scale(&mut self, factor: F) {
        for layer in self.layers.iter_mut().flatten() {
            for w in layer.weights.data_mut() {
                *w *= factor;
            }
            for b in layer.bias.data_mut() {
                *b *= factor;
            }
        }
    }
}

fn init_layer<F: Real>(
    rng: &mut ChaCha8Rng,
    weight_shape: Vec<usize>,
    bias_shape: Vec<usize>,
    fan_in: usize,
) -> LayerParams<F> {
    let limit = (6.0 / fan_in as f64).sqrt();
    let len: usize = weight_shape.iter().product();
    let data: Vec<F> = (0..len)
        .map(|_| real(rng.random_range(-limit..limit)))
        .collect();
    LayerParams {
        weights: Tensor::new(weight_shape, data).expect("sized exactly"),
        bias: Tensor::zeros(bias_shape),
    }
}

/// Activations recorded during a forward pass: input first, then each
/// layer's output. The softmax layer records logits (its loss and gradient
/// come from [`softmax_cross_entropy`]).
fn forward_activations<F: Real>(
    spec: &NetworkSpec,
    params: &NetworkParams<F>,
    input: &Tensor<F>,
) -> Result<Vec<Tensor<F>>, NnError> {
    if input.shape() != spec.input_shape {
        return Err(NnError::ShapeMismatch(format!(
            "network input: expected {:?}, got {:?}",
            spec.input_shape,
            input.shape()
        )));
    }
    let mut acts = Vec::with_capacity(spec.layers.len() + 1);
    acts.push(input.clone());
    for (idx, layer) in spec.layers.iter().enumerate() {
        let current = acts.last().expect("non-empty");
        let next = match layer {
            LayerSpec::Conv { .. } => {
                let lp = params.layer(idx).expect("conv has parameters");
                conv2d_forward(current, &lp.weights, &lp.bias)?
            }
            LayerSpec::ZeroPad { pad } => zero_pad_forward(current, *pad)?,
            LayerSpec::Relu => relu_forward(current),
            LayerSpec::MaxPool2 => maxpool2_forward(current)?,
            LayerSpec::FullyConnected { .. } => {
                let lp = params.layer(idx).expect("fully connected has parameters");
                fully_connected_forward(&current.flattened(), &lp.weights, &lp.bias)?
            }
            LayerSpec::SoftmaxOutput => current.clone(),
        };
        acts.push(next);
    }
    Ok(acts)
}

/// Logits of the layer stack (the softmax head's input).
pub fn forward_logits<F: Real>(
    spec: &NetworkSpec,
    params: &NetworkParams<F>,
    input: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    Ok(forward_activations(spec, params, input)?
        .pop()
        .expect("activations include the input"))
}

/// Class probabilities and the predicted class (lowest index wins ties).
pub fn predict<F: Real>(
    spec: &NetworkSpec,
    params: &NetworkParams<F>,
    input: &Tensor<F>,
) -> Result<(usize, Tensor<F>), NnError> {
    let logits = forward_logits(spec, params, input)?;
    let probs = softmax(&logits)?;
    let mut best = 0;
    for (i, &p) in probs.data().iter().enumerate() {
        if p > probs.data()[best] {
            best = i;
        }
    }
    Ok((best, probs))
}

/// Cross-entropy loss of one sample, forward pass only.
pub fn sample_loss<F: Real>(
    spec: &NetworkSpec,
    params: &NetworkParams<F>,
    input: &Tensor<F>,
    label: usize,
) -> Result<F, NnError> {
    let logits = forward_logits(spec, params, input)?;
    Ok(softmax_cross_entropy(&logits, label)?.0)
}

/// Cross-entropy loss for one sample plus gradients for every parameter.
pub fn loss_and_gradients<F: Real>(
    spec: &NetworkSpec,
    params: &NetworkParams<F>,
    input: &Tensor<F>,
    label: usize,
) -> Result<(F, NetworkParams<F>), NnError> {
    match spec.layers.last() {
        Some(LayerSpec::SoftmaxOutput) => {}
        _ => {
            return Err(NnError::InvalidSpec(
                "training requires a softmax output layer".into(),
            ))
        }
    }
    let acts = forward_activations(spec, params, input)?;
    let logits = &acts[spec.layers.len() - 1];
    let (loss, ce_grad) = softmax_cross_entropy(logits, label)?;

    let mut grads = NetworkParams {
        layers: vec![None; spec.layers.len()],
    };
    let mut upstream = ce_grad;
    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        let layer_input = &acts[idx];
        upstream = match layer {
            LayerSpec::SoftmaxOutput => upstream,
            LayerSpec::Conv { .. } => {
                let lp = params.layer(idx).expect("conv has parameters");
                let (gi, gw, gb) = conv2d_backward(layer_input, &lp.weights, &upstream)?;
                grads.layers[idx] = Some(LayerParams {
                    weights: gw,
                    bias: gb,
                });
                gi
            }
            LayerSpec::ZeroPad { pad } => zero_pad_backward(&upstream, *pad)?,
            LayerSpec::Relu => relu_backward(layer_input, &upstream)?,
            LayerSpec::MaxPool2 => maxpool2_backward(layer_input, &upstream)?,
            LayerSpec::FullyConnected { .. } => {
                let lp = params.layer(idx).expect("fully connected has parameters");
                let (gi, gw, gb) =
                    fully_connected_backward(&layer_input.flattened(), &lp.weights, &upstream)?;
                grads.layers[idx] = Some(LayerParams {
                    weights: gw,
                    bias: gb,
                });
                gi.reshape(layer_input.shape().to_vec())?
            }
        };
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            input_shape: [1, 6, 6],
            layers: vec![
                LayerSpec::Conv {
                    out_channels: 2,
                    kernel: 3,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::FullyConnected { units: 3 },
                LayerSpec::SoftmaxOutput,
            ],
            seed: 11,
        }
    }

    #[test]
    fn shapes_chain_through_layers() {
        let shapes = propagate_shapes(&small_spec()).unwrap();
        assert_eq!(
            shapes,
            vec![
                vec![1, 6, 6],
                vec![2, 4, 4],
                vec![2, 4, 4],
                vec![2, 2, 2],
                vec![3],
                vec![3],
            ]
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.layers.insert(0, LayerSpec::SoftmaxOutput);
        assert!(propagate_shapes(&spec).is_err());

        let odd_pool = NetworkSpec {
            input_shape: [1, 5, 5],
            layers: vec![LayerSpec::MaxPool2],
            seed: 0,
        };
        assert!(propagate_shapes(&odd_pool).is_err());

        let big_kernel = NetworkSpec {
            input_shape: [1, 2, 2],
            layers: vec![LayerSpec::Conv {
                out_channels: 1,
                kernel: 3,
            }],
            seed: 0,
        };
        assert!(propagate_shapes(&big_kernel).is_err());
    }

    #[test]
    fn parameter_count_sums_conv_and_fc() {
        // conv: (3*3*1 + 1) * 2 = 20; fc: (2*2*2 + 1) * 3 = 27
        assert_eq!(count_params(&small_spec()).unwrap(), 47);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let spec = small_spec();
        let a = NetworkParams::<f64>::init_he_uniform(&spec).unwrap();
        let b = NetworkParams::<f64>::init_he_uniform(&spec).unwrap();
        assert_eq!(a, b);

        let mut other = spec.clone();
        other.seed = 12;
        let c = NetworkParams::<f64>::init_he_uniform(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn he_uniform_respects_fan_in_limit() {
        let spec = small_spec();
        let params = NetworkParams::<f64>::init_he_uniform(&spec).unwrap();
        let conv = params.layer(0).unwrap();
        let limit = (6.0f64 / 9.0).sqrt();
        assert!(conv.weights.data().iter().all(|w| w.abs() < limit + 1e-12));
        assert!(conv.bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn predict_breaks_ties_toward_lowest_index() {
        let spec = NetworkSpec {
            input_shape: [1, 2, 2],
            layers: vec![
                LayerSpec::FullyConnected { units: 3 },
                LayerSpec::SoftmaxOutput,
            ],
            seed: 0,
        };
        // zero weights -> equal logits -> tie on every class
        let params = NetworkParams::<f64>::zeros_like(&spec).unwrap();
        let input = Tensor::scalar_filled(vec![1, 2, 2], 1.0);
        let (class, probs) = predict(&spec, &params, &input).unwrap();
        assert_eq!(class, 0);
        assert!((probs.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_network_on_zero_input_has_zero_conv_gradients() {
        let spec = small_spec();
        let params = NetworkParams::<f64>::zeros_like(&spec).unwrap();
        let input = Tensor::zeros(vec![1, 6, 6]);
        let (loss, grads) = loss_and_gradients(&spec, &params, &input, 0).unwrap();
        assert!((loss - (3.0f64).ln()).abs() < 1e-12);
        let conv_grads = grads.layer(0).unwrap();
        assert!(conv_grads.weights.data().iter().all(|&g| g == 0.0));
    }
}
