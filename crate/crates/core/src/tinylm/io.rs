//! Weight file: a UTF-8 header followed by raw little-endian `f32` data.
//!
//! ```text
//! satprobe-tinylm 1
//! vocab_size 12
//! d_model 8
//! n_layers 2
//! n_heads 2
//! activation silu
//! attn_scale sqrt_head_dim
//! seed 7
//! tensor embedding 0 12 8
//! tensor layer0.head0.w_q 96 8 4
//! ...
//! data
//! <f32 little-endian payload>
//! ```
//!
//! Tensor lines give `name offset rows cols`, with the offset counted in
//! `f32` elements from the start of the payload.

use std::fs;
use std::path::Path;

use super::{Activation, AttnScale, ModelConfig, ModelError, ModelWeights};
use crate::Scalar;

const MAGIC: &str = "satprobe-tinylm 1";

pub fn save_weights<S: Scalar>(w: &ModelWeights<S>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let cfg = &w.config;
    let mut header = format!(
        "{MAGIC}\nvocab_size {}\nd_model {}\nn_layers {}\nn_heads {}\nactivation {}\nattn_scale {}\nseed {}\n",
        cfg.vocab_size,
        cfg.d_model,
        cfg.n_layers,
        cfg.n_heads,
        cfg.activation.as_str(),
        cfg.attn_scale.as_str(),
        cfg.seed
    );
    let mut payload = Vec::new();
    let mut offset = 0usize;
    for (name, m) in w.tensors() {
        header.push_str(&format!("tensor {name} {offset} {} {}\n", m.rows(), m.cols()));
        for &v in m.as_slice() {
            payload.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
        offset += m.rows() * m.cols();
    }
    header.push_str("data\n");
    let mut bytes = header.into_bytes();
    bytes.extend(payload);
    fs::write(path, bytes).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn load_weights<S: Scalar>(path: impl AsRef<Path>) -> Result<ModelWeights<S>, ModelError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    parse_weights(&bytes)
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

pub(crate) fn parse_weights<S: Scalar>(bytes: &[u8]) -> Result<ModelWeights<S>, ModelError> {
    let marker = b"\ndata\n";
    let split = bytes.windows(marker.len()).position(|w| w == marker).ok_or_else(|| bad("missing data marker"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let payload = &bytes[split + marker.len()..];
    if !payload.len().is_multiple_of(4) {
        return Err(bad("payload length is not a multiple of 4"));
    }
    let floats: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("unrecognized magic line"));
    }
    let mut cfg = ModelConfig::new(0, 0, 0, 0);
    let mut tensors = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<usize, ModelError> {
            parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("bad header line: {line}")))
        };
        match parts.first().copied() {
            Some("vocab_size") => cfg.vocab_size = num(1)?,
            Some("d_model") => cfg.d_model = num(1)?,
            Some("n_layers") => cfg.n_layers = num(1)?,
            Some("n_heads") => cfg.n_heads = num(1)?,
            Some("seed") => cfg.seed = parts.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad seed"))?,
            Some("activation") => {
                cfg.activation = parts.get(1).and_then(|s| Activation::parse(s)).ok_or_else(|| bad("bad activation"))?
            }
            Some("attn_scale") => {
                cfg.attn_scale = parts.get(1).and_then(|s| AttnScale::parse(s)).ok_or_else(|| bad("bad attn_scale"))?
            }
            Some("tensor") => {
                let name = parts.get(1).ok_or_else(|| bad("tensor line without name"))?.to_string();
                tensors.push((name, num(2)?, num(3)?, num(4)?));
            }
            Some(other) => return Err(bad(format!("unknown header key {other}"))),
            None => {}
        }
    }
    cfg.validate()?;

    let mut w = ModelWeights::<S>::zeros(&cfg)?;
    let expected: Vec<(String, usize, usize)> =
        w.tensors().into_iter().map(|(n, m)| (n, m.rows(), m.cols())).collect();
    if expected.len() != tensors.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "config implies {} tensors, header lists {}",
            expected.len(),
            tensors.len()
        )));
    }
    for ((name, rows, cols), (got_name, offset, got_rows, got_cols)) in expected.iter().zip(&tensors) {
        if name != got_name || rows != got_rows || cols != got_cols {
            return Err(ModelError::ShapeMismatch(format!(
                "expected {name} {rows}x{cols}, found {got_name} {got_rows}x{got_cols}"
            )));
        }
        if offset + rows * cols > floats.len() {
            return Err(bad(format!("tensor {name} runs past the end of the payload")));
        }
    }
    for (m, (_, offset, rows, cols)) in w.tensors_mut().into_iter().zip(&tensors) {
        for (dst, &src) in m.as_mut_slice().iter_mut().zip(&floats[*offset..offset + rows * cols]) {
            *dst = S::of(src as f64);
        }
    }
    if !w.all_finite() {
        return Err(bad("non-finite weight"));
    }
    Ok(w)
}
