//! Canonical architectures: the trainable desk-scale network and the
//! VGG-16 descriptor used for architecture arithmetic.

use super::network::{LayerSpec, NetworkSpec};

/// Desk-scale classifier in the stacked-small-filter style: two 3x3
/// convolution pairs with pooling, then a 32-unit hidden layer and a
/// two-class softmax, for 1x32x32 grayscale input.
pub fn tiny_vgg(seed: u64) -> NetworkSpec {
    use LayerSpec::*;
    NetworkSpec {
        input_shape: [1, 32, 32],
        layers: vec![
            Conv {
                out_channels: 8,
                kernel: 3,
            },
            Relu,
            Conv {
                out_channels: 8,
                kernel: 3,
            },
            Relu,
            MaxPool2,
            Conv {
                out_channels: 16,
                kernel: 3,
            },
            Relu,
            Conv {
                out_channels: 16,
                kernel: 3,
            },
            Relu,
            MaxPool2,
            FullyConnected { units: 32 },
            Relu,
            FullyConnected { units: 2 },
            SoftmaxOutput,
        ],
        seed,
    }
}

/// The 16-weight-layer VGG configuration for 3x224x224 input: thirteen
/// padded 3x3 convolutions in five pooled blocks (64, 128, 256, 512, 512
/// channels), then FC-4096, FC-4096, and a 1000-class softmax.
///
/// This is a descriptor for shape propagation and parameter counting;
/// training it is out of scope for this crate.
pub fn vgg16_descriptor() -> NetworkSpec {
    let mut layers = Vec::new();
    let blocks: [&[usize]; 5] = [
        &[64, 64],
        &[128, 128],
        &[256, 256, 256],
        &[512, 512, 512],
        &[512, 512, 512],
    ];
    for block in blocks {
        for &channels in block {
            layers.push(LayerSpec::ZeroPad { pad: 1 });
            layers.push(LayerSpec::Conv {
                out_channels: channels,
                kernel: 3,
            });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::MaxPool2);
    }
    layers.push(LayerSpec::FullyConnected { units: 4096 });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::FullyConnected { units: 4096 });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::FullyConnected { units: 1000 });
    layers.push(LayerSpec::SoftmaxOutput);

    NetworkSpec {
        input_shape: [3, 224, 224],
        layers,
        seed: 0,
    }
}
