//! A small decoder-only transformer whose forward pass exposes every
//! quantity the probes consume.
//!
//! The residual update per layer is `x^ℓ = x^{ℓ-1} + a^ℓ + m^ℓ`, where the
//! attention contribution `a^ℓ_i = Σ_h Σ_j A^{ℓ,h}_{i,j} (x^{ℓ-1}_j W_V^{ℓ,h}) W_O^{ℓ,h}`
//! and the MLP contribution `m^ℓ_i = σ((a^ℓ_i + x^{ℓ-1}_i) W_I^ℓ) W_F^ℓ`.
//! Vectors are rows and multiply matrices from the left. There is no layer
//! normalization and no positional encoding; the causal mask is the only
//! source of order information.

mod forward;
mod generate;
mod io;
mod weights;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use forward::{forward, ForwardCapture};
pub use generate::{capture_to_trace, generate_greedy, pick_greedy, Generation};
pub use io::{load_weights, save_weights};
pub use weights::{init_random, HeadWeights, LayerWeights, ModelWeights};

use crate::trace::TraceError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {token} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: usize, vocab_size: usize },
    #[error("input token sequence is empty")]
    EmptyInput,
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    #[default]
    Silu,
}

impl Activation {
    #[inline]
    pub fn apply<S: crate::Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Silu => x * crate::scalar::sigmoid(x),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Silu => "silu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "silu" => Some(Activation::Silu),
            _ => None,
        }
    }
}

/// Denominator applied to query-key scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttnScale {
    /// `sqrt(d_h)`.
    #[default]
    SqrtHeadDim,
    /// `sqrt(d_h / H)`.
    PaperLiteral,
}

impl AttnScale {
    pub fn denominator(self, head_dim: usize, n_heads: usize) -> f64 {
        match self {
            AttnScale::SqrtHeadDim => (head_dim as f64).sqrt(),
            AttnScale::PaperLiteral => (head_dim as f64 / n_heads as f64).sqrt(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttnScale::SqrtHeadDim => "sqrt_head_dim",
            AttnScale::PaperLiteral => "paper_literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sqrt_head_dim" => Some(AttnScale::SqrtHeadDim),
            "paper_literal" => Some(AttnScale::PaperLiteral),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub attn_scale: AttnScale,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, d_model: usize, n_layers: usize, n_heads: usize) -> Self {
        Self {
            vocab_size,
            d_model,
            n_layers,
            n_heads,
            activation: Activation::default(),
            attn_scale: AttnScale::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0 || self.d_model == 0 || self.n_layers == 0 || self.n_heads == 0 {
            return Err(ModelError::InvalidConfig("all dimensions must be at least 1".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "model dim {} is not divisible by head count {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}
