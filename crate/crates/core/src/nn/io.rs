//! Binary parameter files and loss-trace CSVs.
//!
//! A parameter file is a magic string, an 8-byte architecture fingerprint,
//! then every parameterized layer's weights and bias in layer order as
//! little-endian 64-bit reals. The fingerprint covers the input shape and
//! layer list (not the seed), so loading validates that the file matches
//! the architecture it is being loaded into.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::network::{LayerSpec, NetworkParams, NetworkSpec};
use super::{NnError, Real};

const MAGIC: &[u8; 8] = b"CNNPARM1";

/// First eight bytes of the SHA-256 of the canonical architecture text.
pub fn spec_fingerprint(spec: &NetworkSpec) -> [u8; 8] {
    let digest = Sha256::digest(canonical_architecture(spec).as_bytes());
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

fn canonical_architecture(spec: &NetworkSpec) -> String {
    let mut text = format!(
        "input:{}x{}x{}",
        spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]
    );
    for layer in &spec.layers {
        match layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
            } => write!(text, "|conv:{out_channels}:{kernel}").expect("string write"),
            LayerSpec::ZeroPad { pad } => write!(text, "|pad:{pad}").expect("string write"),
            LayerSpec::Relu => text.push_str("|relu"),
            LayerSpec::MaxPool2 => text.push_str("|maxpool2"),
            LayerSpec::FullyConnected { units } => {
                write!(text, "|fc:{units}").expect("string write")
            }
            LayerSpec::SoftmaxOutput => text.push_str("|softmax"),
        }
    }
    text
}

/// Serializes trained parameters next to the architecture fingerprint.
pub fn save_params<F: Real>(
    spec: &NetworkSpec,
    params: &NetworkParams<F>,
    path: &Path,
) -> Result<(), NnError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&spec_fingerprint(spec));
    for layer in params.layers().iter().flatten() {
        for tensor in [&layer.weights, &layer.bias] {
            for &v in tensor.data() {
                let v = v.to_f64().expect("scalar converts to f64");
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Loads parameters for `spec`, validating magic, fingerprint, and length.
pub fn load_params<F: Real>(spec: &NetworkSpec, path: &Path) -> Result<NetworkParams<F>, NnError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(NnError::BadModelFile("missing magic string".into()));
    }
    if bytes[8..16] != spec_fingerprint(spec) {
        return Err(NnError::FingerprintMismatch);
    }
    let mut params = NetworkParams::<F>::zeros_like(spec)?;
    let mut offset = 16usize;
    for layer in params.layers_mut().iter_mut().flatten() {
        for tensor in [&mut layer.weights, &mut layer.bias] {
            for v in tensor.data_mut() {
                let end = offset + 8;
                if end > bytes.len() {
                    return Err(NnError::BadModelFile("file shorter than spec".into()));
                }
                let raw = f64::from_le_bytes(bytes[offset..end].try_into().expect("8 bytes"));
                if !raw.is_finite() {
                    return Err(NnError::BadModelFile("non-finite parameter".into()));
                }
                *v = F::from_f64(raw)
                    .ok_or_else(|| NnError::BadModelFile("parameter out of range".into()))?;
                offset = end;
            }
        }
    }
    if offset != bytes.len() {
        return Err(NnError::BadModelFile(format!(
            "{} trailing bytes",
            bytes.len() - offset
        )));
    }
    Ok(params)
}

/// Writes a loss trace as `epoch,loss` CSV (epochs start at 1).
pub fn write_loss_trace(path: &Path, losses: &[f64]) -> Result<(), NnError> {
    let mut text = String::from("epoch,loss\n");
    for (i, loss) in losses.iter().enumerate() {
        writeln!(text, "{},{:.6}", i + 1, loss).expect("string write");
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a loss trace written by [`write_loss_trace`].
pub fn read_loss_trace(path: &Path) -> Result<Vec<f64>, NnError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("epoch,loss") {
        return Err(NnError::BadModelFile("bad loss trace header".into()));
    }
    let mut losses = Vec::new();
    for line in lines {
        let (_, loss) = line
            .split_once(',')
            .ok_or_else(|| NnError::BadModelFile(format!("bad trace line {line:?}")))?;
        losses.push(
            loss.parse()
                .map_err(|_| NnError::BadModelFile(format!("bad loss value {loss:?}")))?,
        );
    }
    Ok(losses)
}
