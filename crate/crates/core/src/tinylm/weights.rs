use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};
use crate::linalg::Matrix;
use crate::Scalar;

/// Per-head projections: `w_q`, `w_k`, `w_v` are `d × d_h`, `w_o` is `d_h × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadWeights<S> {
    pub w_q: Matrix<S>,
    pub w_k: Matrix<S>,
    pub w_v: Matrix<S>,
    pub w_o: Matrix<S>,
}

/// One block: attention heads plus the `d × d` MLP input and output maps.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<S> {
    pub heads: Vec<HeadWeights<S>>,
    pub w_in: Matrix<S>,
    pub w_out: Matrix<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights<S> {
    pub config: ModelConfig,
    /// `|V| × d`.
    pub embedding: Matrix<S>,
    pub layers: Vec<LayerWeights<S>>,
    /// `d × |V|`.
    pub unembedding: Matrix<S>,
}

impl<S: Scalar> ModelWeights<S> {
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let (v, d, dh) = (config.vocab_size, config.d_model, config.head_dim());
        let head = HeadWeights {
            w_q: Matrix::zeros(d, dh),
            w_k: Matrix::zeros(d, dh),
            w_v: Matrix::zeros(d, dh),
            w_o: Matrix::zeros(dh, d),
        };
        let layer = LayerWeights { heads: vec![head; config.n_heads], w_in: Matrix::zeros(d, d), w_out: Matrix::zeros(d, d) };
        Ok(Self {
            config: config.clone(),
            embedding: Matrix::zeros(v, d),
            layers: vec![layer; config.n_layers],
            unembedding: Matrix::zeros(d, v),
        })
    }

    /// Named tensors in canonical order.
    pub fn tensors(&self) -> Vec<(String, &Matrix<S>)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (l, layer) in self.layers.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                out.push((format!("layer{l}.head{h}.w_q"), &head.w_q));
                out.push((format!("layer{l}.head{h}.w_k"), &head.w_k));
                out.push((format!("layer{l}.head{h}.w_v"), &head.w_v));
                out.push((format!("layer{l}.head{h}.w_o"), &head.w_o));
            }
            out.push((format!("layer{l}.w_in"), &layer.w_in));
            out.push((format!("layer{l}.w_out"), &layer.w_out));
        }
        out.push(("unembedding".to_string(), &self.unembedding));
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Matrix<S>> {
        let mut out = vec![&mut self.embedding];
        for layer in &mut self.layers {
            for head in &mut layer.heads {
                out.push(&mut head.w_q);
                out.push(&mut head.w_k);
                out.push(&mut head.w_v);
                out.push(&mut head.w_o);
            }
            out.push(&mut layer.w_in);
            out.push(&mut layer.w_out);
        }
        out.push(&mut self.unembedding);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.all_finite())
    }
}

/// Deterministic Gaussian initialization with standard deviation `1/sqrt(d)`.
pub fn init_random<S: Scalar>(config: &ModelConfig) -> Result<ModelWeights<S>, ModelError> {
    let mut w = ModelWeights::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0 / (config.d_model as f64).sqrt()).expect("positive std");
    for m in w.tensors_mut() {
        for x in m.as_mut_slice() {
            *x = S::of(normal.sample(&mut rng));
        }
    }
    Ok(w)
}
