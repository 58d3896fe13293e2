use super::{ModelError, ModelWeights};
use crate::linalg::Matrix;
use crate::scalar::softmax_in_place;
use crate::Scalar;

/// Everything recorded during one forward pass over a token sequence.
#[derive(Clone, Debug)]
pub struct ForwardCapture<S> {
    /// Residual stream per layer boundary; `hidden[0]` is the embedding and
    /// `hidden[ℓ]` the output of layer `ℓ` (1-based). Each is `T × d`.
    pub hidden: Vec<Matrix<S>>,
    /// Causal attention weights `[layer][head]`, each `T × T`.
    pub attn: Vec<Vec<Matrix<S>>>,
    /// Value-output projections `(x_j W_V) W_O` per `[layer][head]`, each `T × d`.
    pub head_values: Vec<Vec<Matrix<S>>>,
    /// Attention contribution `a^ℓ_i` per layer, `T × d`.
    pub attn_out: Vec<Matrix<S>>,
    /// MLP contribution `m^ℓ_i` per layer, `T × d`.
    pub mlp_out: Vec<Matrix<S>>,
    /// Unembedded logits of the final position.
    pub logits: Vec<S>,
    /// Natural-log next-token distribution at the final position.
    pub next_token_logprobs: Vec<S>,
}

impl<S: Scalar> ForwardCapture<S> {
    pub fn seq_len(&self) -> usize {
        self.hidden[0].rows()
    }

    pub fn n_layers(&self) -> usize {
        self.attn.len()
    }

    pub fn n_heads(&self) -> usize {
        self.attn.first().map_or(0, Vec::len)
    }

    pub fn next_token_probs(&self) -> Vec<S> {
        self.next_token_logprobs.iter().map(|lp| lp.exp()).collect()
    }

    /// Attention weights of the final position at `(layer, head)`.
    pub fn final_attention_row(&self, layer: usize, head: usize) -> &[S] {
        self.attn[layer][head].row(self.seq_len() - 1)
    }

    /// `A^{ℓ,h}_{i,j} (x_j W_V^{ℓ,h}) W_O^{ℓ,h}`: what token `j` writes into token `i` through one head.
    pub fn head_contribution(&self, layer: usize, head: usize, i: usize, j: usize) -> Vec<S> {
        let weight = self.attn[layer][head].get(i, j);
        self.head_values[layer][head].row(j).iter().map(|&v| weight * v).collect()
    }

    /// `a^ℓ_{i,j}`: the head-summed contribution from token `j` to token `i`.
    pub fn pair_contribution(&self, layer: usize, i: usize, j: usize) -> Vec<S> {
        let d = self.hidden[0].cols();
        let mut out = vec![S::zero(); d];
        for h in 0..self.n_heads() {
            for (o, v) in out.iter_mut().zip(self.head_contribution(layer, h, i, j)) {
                *o += v;
            }
        }
        out
    }
}

/// Runs the model over `tokens`, recording all intermediate quantities.
pub fn forward<S: Scalar>(w: &ModelWeights<S>, tokens: &[usize]) -> Result<ForwardCapture<S>, ModelError> {
    let cfg = &w.config;
    if tokens.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if let Some(&token) = tokens.iter().find(|&&t| t >= cfg.vocab_size) {
        return Err(ModelError::TokenOutOfRange { token, vocab_size: cfg.vocab_size });
    }
    let t = tokens.len();
    let d = cfg.d_model;
    let scale = S::of(cfg.attn_scale.denominator(cfg.head_dim(), cfg.n_heads));

    let mut x = Matrix::zeros(t, d);
    for (i, &tok) in tokens.iter().enumerate() {
        x.row_mut(i).copy_from_slice(w.embedding.row(tok));
    }

    let mut hidden = Vec::with_capacity(cfg.n_layers + 1);
    let mut attn = Vec::with_capacity(cfg.n_layers);
    let mut head_values = Vec::with_capacity(cfg.n_layers);
    let mut attn_out = Vec::with_capacity(cfg.n_layers);
    let mut mlp_out = Vec::with_capacity(cfg.n_layers);

    for (li, layer) in w.layers.iter().enumerate() {
        let mut a = Matrix::zeros(t, d);
        let mut layer_attn = Vec::with_capacity(layer.heads.len());
        let mut layer_values = Vec::with_capacity(layer.heads.len());
        for head in &layer.heads {
            let q = x.matmul(&head.w_q);
            let k = x.matmul(&head.w_k);
            let vo = x.matmul(&head.w_v).matmul(&head.w_o);
            let mut weights = Matrix::zeros(t, t);
            for i in 0..t {
                let row = &mut weights.row_mut(i)[..=i];
                for (j, s) in row.iter_mut().enumerate() {
                    *s = crate::linalg::dot(q.row(i), k.row(j)) / scale;
                }
                softmax_in_place(row);
            }
            for i in 0..t {
                let out = a.row_mut(i);
                for j in 0..=i {
                    let wij = weights.get(i, j);
                    for (o, &v) in out.iter_mut().zip(vo.row(j)) {
                        *o += wij * v;
                    }
                }
            }
            layer_attn.push(weights);
            layer_values.push(vo);
        }

        let mut mlp_in = a.clone();
        for (m, &xv) in mlp_in.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *m += xv;
        }
        let act = cfg.activation;
        let m = mlp_in.matmul(&layer.w_in).map(|v| act.apply(v)).matmul(&layer.w_out);

        let mut next = x.clone();
        for ((n, &av), &mv) in next.as_mut_slice().iter_mut().zip(a.as_slice()).zip(m.as_slice()) {
            *n += av + mv;
        }
        if !next.all_finite() || !a.all_finite() {
            return Err(ModelError::NonFinite { layer: li });
        }

        hidden.push(std::mem::replace(&mut x, next));
        attn.push(layer_attn);
        head_values.push(layer_values);
        attn_out.push(a);
        mlp_out.push(m);
    }
    hidden.push(x);

    let last = hidden[cfg.n_layers].row(t - 1);
    let logits = w.unembedding.left_mul(last);
    let mut logprobs = logits.clone();
    let lse = {
        let mut probs = logits.clone();
        softmax_in_place(&mut probs)
    };
    for lp in logprobs.iter_mut() {
        *lp -= lse;
    }
    if !lse.is_finite() {
        return Err(ModelError::NonFinite { layer: cfg.n_layers });
    }

    Ok(ForwardCapture { hidden, attn, head_values, attn_out, mlp_out, logits, next_token_logprobs: logprobs })
}
