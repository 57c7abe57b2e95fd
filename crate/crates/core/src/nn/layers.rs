//! Layer primitives: stride-1 valid convolution, 2x2 max pooling, ReLU,
//! fully connected, zero padding, and the softmax cross-entropy head.
//!
//! Each primitive is a pair of free functions, forward and backward; the
//! backward functions take the layer's original input and the upstream
//! gradient and return gradients by the chain rule. Tie-breaking picks the
//! first occurrence in row-major order and the ReLU gradient at exactly 0
//! is 0, so every path is deterministic.

use super::{NnError, Real, Tensor};

/// Gradients w.r.t. (input, weights, bias).
pub type Gradients<F> = (Tensor<F>, Tensor<F>, Tensor<F>);

fn expect_rank<F: Real>(t: &Tensor<F>, rank: usize, what: &str) -> Result<(), NnError> {
    if t.shape().len() == rank {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch(format!(
            "{what}: expected rank {rank}, got shape {:?}",
            t.shape()
        )))
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Valid (no padding) stride-1 convolution.
///
/// `input` is `[C, H, W]`, `kernels` `[O, C, k, k]`, `bias` `[O]`; the
/// output is `[O, H-k+1, W-k+1]`.
pub fn conv2d_forward<F: Real>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    let (c_in, h, w, c_out, k) = conv_shapes(input, kernels, bias)?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = Tensor::zeros(vec![c_out, oh, ow]);

    let x = input.data();
    let ker = kernels.data();
    for o in 0..c_out {
        let out_plane = &mut out.data_mut()[o * oh * ow..(o + 1) * oh * ow];
        out_plane.fill(bias.data()[o]);
        for c in 0..c_in {
            let in_plane = &x[c * h * w..(c + 1) * h * w];
            let k_base = (o * c_in + c) * k * k;
            for ki in 0..k {
                for kj in 0..k {
                    let weight = ker[k_base + ki * k + kj];
                    for y in 0..oh {
                        let in_row = &in_plane[(y + ki) * w + kj..(y + ki) * w + kj + ow];
                        let out_row = &mut out_plane[y * ow..(y + 1) * ow];
                        for (acc, &v) in out_row.iter_mut().zip(in_row) {
                            *acc += weight * v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] w.r.t. input, kernels, and bias.
pub fn conv2d_backward<F: Real>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    upstream: &Tensor<F>,
) -> Result<Gradients<F>, NnError> {
    let bias_shape = vec![kernels.shape()[0]];
    let bias = Tensor::zeros(bias_shape);
    let (c_in, h, w, c_out, k) = conv_shapes(input, kernels, &bias)?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    if upstream.shape() != [c_out, oh, ow] {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d upstream: expected [{c_out}, {oh}, {ow}], got {:?}",
            upstream.shape()
        )));
    }

    let mut grad_input = input.zeros_like();
    let mut grad_kernels = kernels.zeros_like();
    let mut grad_bias = bias.zeros_like();

    let x = input.data();
    let ker = kernels.data();
    let g = upstream.data();
    for o in 0..c_out {
        let g_plane = &g[o * oh * ow..(o + 1) * oh * ow];
        grad_bias.data_mut()[o] = g_plane.iter().copied().sum();
        for c in 0..c_in {
            let in_plane = &x[c * h * w..(c + 1) * h * w];
            let k_base = (o * c_in + c) * k * k;
            for ki in 0..k {
                for kj in 0..k {
                    let weight = ker[k_base + ki * k + kj];
                    let mut wsum = F::zero();
                    for y in 0..oh {
                        let g_row = &g_plane[y * ow..(y + 1) * ow];
                        let in_off = (y + ki) * w + kj;
                        let in_row = &in_plane[in_off..in_off + ow];
                        let gi_row =
                            &mut grad_input.data_mut()[c * h * w + in_off..c * h * w + in_off + ow];
                        for ((&gv, &iv), gi) in g_row.iter().zip(in_row).zip(gi_row) {
                            wsum += gv * iv;
                            *gi += gv * weight;
                        }
                    }
                    grad_kernels.data_mut()[k_base + ki * k + kj] += wsum;
                }
            }
        }
    }
    Ok((grad_input, grad_kernels, grad_bias))
}

fn conv_shapes<F: Real>(
    input: &Tensor<F>,
    kernels: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<(usize, usize, usize, usize, usize), NnError> {
    expect_rank(input, 3, "conv2d input")?;
    expect_rank(kernels, 4, "conv2d kernels")?;
    expect_rank(bias, 1, "conv2d bias")?;
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, kc, k, k2) = (
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    );
    if kc != c_in || k != k2 {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d kernels {:?} incompatible with input {:?}",
            kernels.shape(),
            input.shape()
        )));
    }
    if bias.shape()[0] != c_out {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d bias {:?} incompatible with {c_out} output channels",
            bias.shape()
        )));
    }
    if k == 0 || k > h || k > w {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d kernel {k} does not fit input {h}x{w}"
        )));
    }
    Ok((c_in, h, w, c_out, k))
}

// ---------------------------------------------------------------------------
// Max pooling (2x2, stride 2)
// ---------------------------------------------------------------------------

pub fn maxpool2_forward<F: Real>(input: &Tensor<F>) -> Result<Tensor<F>, NnError> {
    let (c, h, w) = pool_shapes(input)?;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    let x = input.data();
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out.data_mut()[ch * oh * ow..(ch + 1) * oh * ow];
        for y in 0..oh {
            for xo in 0..ow {
                let base = 2 * y * w + 2 * xo;
                let m = plane[base]
                    .max(plane[base + 1])
                    .max(plane[base + w])
                    .max(plane[base + w + 1]);
                out_plane[y * ow + xo] = m;
            }
        }
    }
    Ok(out)
}

/// Routes each upstream gradient to its window's argmax; ties go to the
/// first cell in row-major window order.
pub fn maxpool2_backward<F: Real>(
    input: &Tensor<F>,
    upstream: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    let (c, h, w) = pool_shapes(input)?;
    let (oh, ow) = (h / 2, w / 2);
    if upstream.shape() != [c, oh, ow] {
        return Err(NnError::ShapeMismatch(format!(
            "maxpool2 upstream: expected [{c}, {oh}, {ow}], got {:?}",
            upstream.shape()
        )));
    }
    let mut grad = input.zeros_like();
    let x = input.data();
    let g = upstream.data();
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for xo in 0..ow {
                let base = 2 * y * w + 2 * xo;
                // row-major window order; strict > keeps the first maximum
                let offsets = [0, 1, w, w + 1];
                let mut best = offsets[0];
                for &off in &offsets[1..] {
                    if plane[base + off] > plane[base + best] {
                        best = off;
                    }
                }
                grad.data_mut()[ch * h * w + base + best] += g[ch * oh * ow + y * ow + xo];
            }
        }
    }
    Ok(grad)
}

fn pool_shapes<F: Real>(input: &Tensor<F>) -> Result<(usize, usize, usize), NnError> {
    expect_rank(input, 3, "maxpool2 input")?;
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NnError::ShapeMismatch(format!(
            "maxpool2 needs even spatial dimensions, got {h}x{w}"
        )));
    }
    Ok((c, h, w))
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

pub fn relu_forward<F: Real>(input: &Tensor<F>) -> Tensor<F> {
    let data = input.data().iter().map(|&v| v.max(F::zero())).collect();
    Tensor::from_raw(input.shape().to_vec(), data)
}

/// Gradient passes where the input was strictly positive (0 at exactly 0).
pub fn relu_backward<F: Real>(
    input: &Tensor<F>,
    upstream: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    if input.shape() != upstream.shape() {
        return Err(NnError::ShapeMismatch(format!(
            "relu upstream {:?} does not match input {:?}",
            upstream.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > F::zero() { g } else { F::zero() })
        .collect();
    Ok(Tensor::from_raw(input.shape().to_vec(), data))
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

/// `W x + b` with `input` `[n]`, `weights` `[m, n]`, `bias` `[m]`.
pub fn fully_connected_forward<F: Real>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>, NnError> {
    let (m, n) = fc_shapes(input, weights, bias)?;
    let x = input.data();
    let mut out = Tensor::zeros(vec![m]);
    for j in 0..m {
        let row = &weights.data()[j * n..(j + 1) * n];
        let mut acc = bias.data()[j];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        out.data_mut()[j] = acc;
    }
    Ok(out)
}

pub fn fully_connected_backward<F: Real>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    upstream: &Tensor<F>,
) -> Result<Gradients<F>, NnError> {
    let bias = Tensor::zeros(vec![weights.shape()[0]]);
    let (m, n) = fc_shapes(input, weights, &bias)?;
    if upstream.shape() != [m] {
        return Err(NnError::ShapeMismatch(format!(
            "fully connected upstream: expected [{m}], got {:?}",
            upstream.shape()
        )));
    }
    let mut grad_input = Tensor::zeros(vec![n]);
    let mut grad_weights = weights.zeros_like();
    let grad_bias = Tensor::from_raw(vec![m], upstream.data().to_vec());
    for j in 0..m {
        let g = upstream.data()[j];
        let w_row = &weights.data()[j * n..(j + 1) * n];
        let gw_row = &mut grad_weights.data_mut()[j * n..(j + 1) * n];
        for (gw, &x) in gw_row.iter_mut().zip(input.data()) {
            *gw = g * x;
        }
        for (gi, wv) in grad_input.data_mut().iter_mut().zip(w_row) {
            *gi += g * *wv;
        }
    }
    Ok((grad_input, grad_weights, grad_bias))
}

fn fc_shapes<F: Real>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<(usize, usize), NnError> {
    expect_rank(input, 1, "fully connected input")?;
    expect_rank(weights, 2, "fully connected weights")?;
    expect_rank(bias, 1, "fully connected bias")?;
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    if input.shape()[0] != n || bias.shape()[0] != m {
        return Err(NnError::ShapeMismatch(format!(
            "fully connected: weights {:?} with input {:?} and bias {:?}",
            weights.shape(),
            input.shape(),
            bias.shape()
        )));
    }
    Ok((m, n))
}

// ---------------------------------------------------------------------------
// Zero padding
// ---------------------------------------------------------------------------

/// Pads both spatial dimensions with `pad` zeros on every side.
pub fn zero_pad_forward<F: Real>(input: &Tensor<F>, pad: usize) -> Result<Tensor<F>, NnError> {
    expect_rank(input, 3, "zero pad input")?;
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = Tensor::zeros(vec![c, ph, pw]);
    for ch in 0..c {
        for y in 0..h {
            let src = &input.data()[ch * h * w + y * w..ch * h * w + (y + 1) * w];
            let dst_off = ch * ph * pw + (y + pad) * pw + pad;
            out.data_mut()[dst_off..dst_off + w].copy_from_slice(src);
        }
    }
    Ok(out)
}

/// Crops the upstream gradient back to the unpadded interior.
pub fn zero_pad_backward<F: Real>(upstream: &Tensor<F>, pad: usize) -> Result<Tensor<F>, NnError> {
    expect_rank(upstream, 3, "zero pad upstream")?;
    let (c, ph, pw) = (
        upstream.shape()[0],
        upstream.shape()[1],
        upstream.shape()[2],
    );
    if ph < 2 * pad + 1 || pw < 2 * pad + 1 {
        return Err(NnError::ShapeMismatch(format!(
            "zero pad upstream {ph}x{pw} smaller than padding {pad}"
        )));
    }
    let (h, w) = (ph - 2 * pad, pw - 2 * pad);
    let mut out = Tensor::zeros(vec![c, h, w]);
    for ch in 0..c {
        for y in 0..h {
            let src_off = ch * ph * pw + (y + pad) * pw + pad;
            let dst = &mut out.data_mut()[ch * h * w + y * w..ch * h * w + (y + 1) * w];
            dst.copy_from_slice(&upstream.data()[src_off..src_off + w]);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

/// Numerically stable softmax of a rank-1 tensor.
pub fn softmax<F: Real>(logits: &Tensor<F>) -> Result<Tensor<F>, NnError> {
    expect_rank(logits, 1, "softmax logits")?;
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    let data = exps.into_iter().map(|e| e / sum).collect();
    Ok(Tensor::from_raw(vec![logits.len()], data))
}

/// Loss `-ln p[true_class]` and its gradient `p - onehot(true_class)`.
pub fn softmax_cross_entropy<F: Real>(
    logits: &Tensor<F>,
    true_class: usize,
) -> Result<(F, Tensor<F>), NnError> {
    expect_rank(logits, 1, "softmax logits")?;
    let classes = logits.len();
    if classes < 2 {
        return Err(NnError::ShapeMismatch(format!(
            "softmax needs at least 2 classes, got {classes}"
        )));
    }
    if true_class >= classes {
        return Err(NnError::ClassOutOfRange {
            index: true_class,
            classes,
        });
    }
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let sum: F = logits.data().iter().map(|&z| (z - max).exp()).sum();
    // loss = ln(sum exp(z - max)) - (z[t] - max); exact and overflow-free
    let loss = sum.ln() - (logits.data()[true_class] - max);
    let mut grad = softmax(logits)?;
    grad.data_mut()[true_class] -= F::one();
    Ok((loss, grad))
}
