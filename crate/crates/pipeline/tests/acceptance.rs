//! Acceptance suite: one test per shipped claim, each printing a
//! pass/fail line. Run with
//! `cargo test -p clahenet-pipeline --test acceptance -- --nocapture`.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clahenet_core::clahe::{build_tile_luts, clahe, clip_and_redistribute, ClaheParams};
use clahenet_core::codec::{decode_image, encode_image, EncodeFormat};
use clahenet_core::histogram::{equalize, Histogram256};
use clahenet_core::metrics::{compute_metrics, ConfusionMatrix};
use clahenet_core::nn::{
    count_params, evaluate_classifier, gradient_check, gradient_check_with_fault, propagate_shapes,
    tiny_vgg, train_classifier, vgg16_descriptor, BackwardFault, Hyperparams, LayerSpec,
    NetworkSpec, Sample,
};
use clahenet_core::raster::Raster;
use clahenet_core::Tensor;
use clahenet_pipeline::{run_experiment, ExperimentConfig};

fn criterion(name: &str, outcome: Result<(), String>) {
    match outcome {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(why) => {
            println!("acceptance {name}: FAIL ({why})");
            panic!("acceptance criterion {name} failed: {why}");
        }
    }
}

fn check(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn random_raster(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Raster {
    let pixels = (0..w * h).map(|_| rng.random()).collect();
    Raster::from_pixels(w, h, pixels).unwrap()
}

// ---------------------------------------------------------------------------
// Metrics exactness
// ---------------------------------------------------------------------------

#[test]
fn metrics_exactness() {
    let run = || -> Result<(), String> {
        let cases: [(ConfusionMatrix, [f64; 5]); 2] = [
            (
                ConfusionMatrix::new(40, 44, 4, 2),
                [0.933333, 0.952381, 0.916667, 0.909091, 0.930233],
            ),
            (
                ConfusionMatrix::new(90, 90, 1, 2),
                [0.983607, 0.978261, 0.989011, 0.989011, 0.983607],
            ),
        ];
        for (cm, expected) in cases {
            let m = compute_metrics::<f64>(&cm).map_err(|e| e.to_string())?;
            let got = [m.accuracy, m.sensitivity, m.specificity, m.precision, m.f1];
            for (label, (g, e)) in ["accuracy", "sensitivity", "specificity", "precision", "f1"]
                .iter()
                .zip(got.iter().zip(expected.iter()))
            {
                check((g - e).abs() < 1e-6, || {
                    format!("{label} of {cm:?}: got {g}, expected {e}")
                })?;
            }
        }
        Ok(())
    };
    criterion("metrics-exactness", run());
}

// ---------------------------------------------------------------------------
// CLAHE reduction oracle
// ---------------------------------------------------------------------------

#[test]
fn clahe_reduction_oracle() {
    let run = || -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
        let single = ClaheParams::new(1, 1, None).map_err(|e| e.to_string())?;
        for case in 0..120 {
            let raster = random_raster(&mut rng, 32, 32);
            let reduced = clahe(&raster, &single).map_err(|e| e.to_string())?;
            check(reduced == equalize(&raster), || {
                format!("1x1 unlimited-clip output differs from global HE (case {case})")
            })?;
        }
        for case in 0..120 {
            let mut bins = [0u32; 256];
            for b in bins.iter_mut() {
                *b = rng.random_range(0..4000);
            }
            let hist = Histogram256::from_bins(bins);
            let limit = rng.random_range(1..2000);
            let clipped = clip_and_redistribute(&hist, limit).map_err(|e| e.to_string())?;
            check(clipped.total() == hist.total(), || {
                format!(
                    "count not conserved (case {case}, limit {limit}): {} -> {}",
                    hist.total(),
                    clipped.total()
                )
            })?;
        }
        Ok(())
    };
    criterion("clahe-reduction-oracle", run());
}

// ---------------------------------------------------------------------------
// CLAHE degeneracy and structure
// ---------------------------------------------------------------------------

#[test]
fn clahe_degeneracy_and_structure() {
    let run = || -> Result<(), String> {
        let grids = [(1, 1), (2, 2), (8, 8)];
        let clips = [Some(1.0), Some(2.0), None];

        let constant = Raster::filled(64, 64, 201).unwrap();
        for (gx, gy) in grids {
            for clip in clips {
                let params = ClaheParams::new(gx, gy, clip).map_err(|e| e.to_string())?;
                let out = clahe(&constant, &params).map_err(|e| e.to_string())?;
                check(out == constant, || {
                    format!("constant image not a fixed point for grid {gx}x{gy} clip {clip:?}")
                })?;
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0x57a7);
        for _ in 0..20 {
            let raster = random_raster(&mut rng, 48, 40);
            for (gx, gy) in grids {
                for clip in clips {
                    let params = ClaheParams::new(gx, gy, clip).map_err(|e| e.to_string())?;
                    let grid = build_tile_luts(&raster, &params).map_err(|e| e.to_string())?;
                    for (i, lut) in grid.luts().iter().enumerate() {
                        check(lut.is_monotone(), || {
                            format!("tile {i} LUT not monotone for grid {gx}x{gy} clip {clip:?}")
                        })?;
                    }
                }
            }
        }

        let raster = random_raster(&mut rng, 61, 53);
        let params = ClaheParams::new(8, 8, Some(2.0)).map_err(|e| e.to_string())?;
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| e.to_string())?;
        let pool8 = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .map_err(|e| e.to_string())?;
        let out1 = pool1
            .install(|| clahe(&raster, &params))
            .map_err(|e| e.to_string())?;
        let out8 = pool8
            .install(|| clahe(&raster, &params))
            .map_err(|e| e.to_string())?;
        check(out1 == out8, || {
            "output differs between 1-thread and 8-thread runs".into()
        })?;
        Ok(())
    };
    criterion("clahe-degeneracy-structure", run());
}

// ---------------------------------------------------------------------------
// Golden enhancement
// ---------------------------------------------------------------------------

#[test]
fn golden_enhancement() {
    let run = || -> Result<(), String> {
        let goldens = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/goldens");
        let input_bytes = std::fs::read(goldens.join("synthetic_64.pgm"))
            .map_err(|e| format!("committed golden input: {e}"))?;
        let golden = std::fs::read(goldens.join("synthetic_64_clahe_8x8_clip2.pgm"))
            .map_err(|e| format!("committed golden output: {e}"))?;
        let input = decode_image(&input_bytes, None)
            .map_err(|e| e.to_string())?
            .into_luma();
        let params = ClaheParams::new(8, 8, Some(2.0)).map_err(|e| e.to_string())?;
        let enhanced = clahe(&input, &params).map_err(|e| e.to_string())?;
        let encoded = encode_image(&enhanced, EncodeFormat::Pgm).map_err(|e| e.to_string())?;
        check(encoded == golden, || {
            "enhanced bytes differ from the committed golden".into()
        })
    };
    criterion("golden-enhancement", run());
}

// ---------------------------------------------------------------------------
// Gradient suite
// ---------------------------------------------------------------------------

#[test]
fn gradient_suite() {
    let run = || -> Result<(), String> {
        const EPSILON: f64 = 1e-5;
        let conv = LayerSpec::Conv {
            out_channels: 2,
            kernel: 3,
        };
        // minimal networks exercising each layer kind; seeds pinned to
        // points away from pooling ties and ReLU zero crossings
        let per_layer: [(&str, NetworkSpec); 5] = [
            (
                "fully-connected",
                NetworkSpec {
                    input_shape: [1, 3, 3],
                    layers: vec![
                        LayerSpec::FullyConnected { units: 4 },
                        LayerSpec::SoftmaxOutput,
                    ],
                    seed: 1,
                },
            ),
            (
                "conv",
                NetworkSpec {
                    input_shape: [1, 4, 4],
                    layers: vec![
                        conv.clone(),
                        LayerSpec::FullyConnected { units: 2 },
                        LayerSpec::SoftmaxOutput,
                    ],
                    seed: 2,
                },
            ),
            (
                "relu",
                NetworkSpec {
                    input_shape: [1, 4, 4],
                    layers: vec![
                        conv.clone(),
                        LayerSpec::Relu,
                        LayerSpec::FullyConnected { units: 2 },
                        LayerSpec::SoftmaxOutput,
                    ],
                    seed: 3,
                },
            ),
            (
                "maxpool",
                NetworkSpec {
                    input_shape: [1, 6, 6],
                    layers: vec![
                        conv.clone(),
                        LayerSpec::MaxPool2,
                        LayerSpec::FullyConnected { units: 2 },
                        LayerSpec::SoftmaxOutput,
                    ],
                    seed: 4,
                },
            ),
            (
                "zero-pad",
                NetworkSpec {
                    input_shape: [1, 4, 4],
                    layers: vec![
                        LayerSpec::ZeroPad { pad: 1 },
                        conv,
                        LayerSpec::FullyConnected { units: 2 },
                        LayerSpec::SoftmaxOutput,
                    ],
                    seed: 5,
                },
            ),
        ];
        for (name, spec) in per_layer {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let len: usize = spec.input_shape.iter().product();
            let data: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let input = Tensor::new(spec.input_shape.to_vec(), data).unwrap();
            let err = gradient_check(&spec, &input, 1, EPSILON).map_err(|e| e.to_string())?;
            check(err < 1e-4, || format!("{name}: max relative error {err:e}"))?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data: Vec<f64> = (0..1024).map(|_| rng.random_range(-1.0..1.0)).collect();
        let input = Tensor::new(vec![1, 32, 32], data).unwrap();
        let err = gradient_check(&tiny_vgg(0), &input, 1, EPSILON).map_err(|e| e.to_string())?;
        check(err < 1e-4, || format!("composed TinyVGG: {err:e}"))?;

        let spec = NetworkSpec {
            input_shape: [1, 4, 4],
            layers: vec![
                LayerSpec::Conv {
                    out_channels: 2,
                    kernel: 3,
                },
                LayerSpec::FullyConnected { units: 2 },
                LayerSpec::SoftmaxOutput,
            ],
            seed: 6,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let input = Tensor::new(vec![1, 4, 4], data).unwrap();
        let err = gradient_check_with_fault(&spec, &input, 0, EPSILON, BackwardFault::SignFlip)
            .map_err(|e| e.to_string())?;
        check(err > 1e-1, || {
            format!("sign-flipped backward reported only {err:e}")
        })?;
        Ok(())
    };
    criterion("gradient-suite", run());
}

// ---------------------------------------------------------------------------
// Architecture arithmetic
// ---------------------------------------------------------------------------

#[test]
fn architecture_arithmetic() {
    let run = || -> Result<(), String> {
        let spec = vgg16_descriptor();
        let shapes = propagate_shapes(&spec).map_err(|e| e.to_string())?;
        let first_fc = spec
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::FullyConnected { .. }))
            .expect("descriptor has fc layers");
        check(shapes[first_fc] == vec![512, 7, 7], || {
            format!("pre-flatten shape {:?}", shapes[first_fc])
        })?;
        let flat: usize = shapes[first_fc].iter().product();
        check(flat == 25_088, || format!("flatten size {flat}"))?;

        let total = count_params(&spec).map_err(|e| e.to_string())?;
        check((130_000_000..=145_000_000).contains(&total), || {
            format!("parameter count {total} outside [130M, 145M]")
        })?;
        // frozen regression constant
        check(total == 138_357_544, || {
            format!("parameter count {total} != 138357544")
        })?;
        Ok(())
    };
    criterion("architecture-arithmetic", run());
}

// ---------------------------------------------------------------------------
// Desk-scale pipeline claim
// ---------------------------------------------------------------------------

#[test]
fn desk_scale_pipeline() {
    let run = || -> Result<(), String> {
        let bench = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmark.conf");
        let base = ExperimentConfig::load(&bench).map_err(|e| e.to_string())?;
        check(base.seed == 7, || {
            format!("committed benchmark seed {} != 7", base.seed)
        })?;

        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut wins_or_ties = 0;
        let mut pinned_seed_holds = false;
        for seed in [7u64, 8, 9, 10, 11] {
            let mut config = base.clone();
            config.seed = seed;
            config.output_dir = work.path().join(format!("seed_{seed}"));
            let outcome = run_experiment(&config).map_err(|e| e.to_string())?;
            let f1_of = |name: &str| {
                outcome
                    .rows
                    .iter()
                    .find(|r| r.name == name)
                    .map(|r| r.metrics.f1)
                    .ok_or_else(|| format!("row {name} missing"))
            };
            let raw = f1_of("no_clahe")?;
            let enhanced = f1_of("clahe")?;
            println!("  seed {seed}: f1 no_clahe={raw:.6}, clahe={enhanced:.6}");
            if enhanced >= raw {
                wins_or_ties += 1;
                if seed == 7 {
                    pinned_seed_holds = true;
                }
            }
        }
        check(pinned_seed_holds, || {
            "enhancement arm lost on the pinned seed 7".into()
        })?;
        check(wins_or_ties >= 4, || {
            format!("enhancement arm won or tied only {wins_or_ties}/5 seeds")
        })?;
        Ok(())
    };
    criterion("desk-scale-pipeline", run());
}

// ---------------------------------------------------------------------------
// Training sanity
// ---------------------------------------------------------------------------

#[test]
fn training_sanity() {
    let run = || -> Result<(), String> {
        let mut samples = Vec::new();
        for variant in 0..4 {
            for class in 0..2usize {
                let hi = 0.7 + 0.05 * variant as f64;
                let lo = 0.1 + 0.02 * variant as f64;
                let mut data = Vec::with_capacity(1024);
                for y in 0..32 {
                    for x in 0..32 {
                        let left = x < 16;
                        let bright = if class == 1 { left } else { !left };
                        let ripple = 0.02 * (((x * 7 + y * 3 + variant) % 5) as f64 - 2.0);
                        data.push(if bright { hi + ripple } else { lo + ripple });
                    }
                }
                samples.push(Sample {
                    input: Tensor::new(vec![1, 32, 32], data).unwrap(),
                    label: class,
                });
            }
        }
        let hyper = Hyperparams {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 8,
            seed: 9,
        };
        let (model, trace) =
            train_classifier(&tiny_vgg(9), &samples, &hyper).map_err(|e| e.to_string())?;
        let (preds, _) = evaluate_classifier(&model, &samples).map_err(|e| e.to_string())?;
        let correct = preds
            .iter()
            .zip(&samples)
            .filter(|(p, s)| **p == s.label)
            .count();
        check(correct == samples.len(), || {
            format!(
                "training accuracy {correct}/{} after 200 epochs",
                samples.len()
            )
        })?;
        for (i, w) in trace.windows(2).enumerate().skip(10) {
            check(w[1] <= w[0] + 1e-6, || {
                format!("loss rose at epoch {}: {} -> {}", i + 1, w[0], w[1])
            })?;
        }

        let (again, trace2) =
            train_classifier(&tiny_vgg(9), &samples, &hyper).map_err(|e| e.to_string())?;
        check(model.params == again.params && trace == trace2, || {
            "identical seeds did not reproduce identical parameters".into()
        })?;
        Ok(())
    };
    criterion("training-sanity", run());
}
