//! Independent forward pass written against nalgebra, used as a test oracle.

use nalgebra::DMatrix;
use satprobe_core::tinylm::Activation;
use satprobe_core::ModelWeights;

pub struct OracleOutput {
    /// Next-token probabilities at the final position.
    pub probs: Vec<f64>,
    /// `[layer][head][j]` = ‖A_{T,j} (x_j W_V) W_O‖₂ at the final position.
    pub final_norms: Vec<Vec<Vec<f64>>>,
    /// `[layer][head]` final attention rows.
    pub final_rows: Vec<Vec<Vec<f64>>>,
}

fn to_na(m: &satprobe_core::Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn dense_forward(w: &ModelWeights, tokens: &[usize]) -> OracleOutput {
    let cfg = &w.config;
    let t = tokens.len();
    let d = cfg.d_model;
    let emb = to_na(&w.embedding);
    let mut x = DMatrix::<f64>::zeros(t, d);
    for (i, &tok) in tokens.iter().enumerate() {
        x.set_row(i, &emb.row(tok));
    }
    let scale = cfg.attn_scale.denominator(cfg.head_dim(), cfg.n_heads);
    let mut final_norms = Vec::new();
    let mut final_rows = Vec::new();
    for layer in &w.layers {
        let mut attn_total = DMatrix::<f64>::zeros(t, d);
        let mut norms_l = Vec::new();
        let mut rows_l = Vec::new();
        for head in &layer.heads {
            let q = &x * to_na(&head.w_q);
            let k = &x * to_na(&head.w_k);
            let scores = (&q * k.transpose()) / scale;
            let mut a = DMatrix::<f64>::zeros(t, t);
            for i in 0..t {
                let m = (0..=i).map(|j| scores[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = (0..=i).map(|j| (scores[(i, j)] - m).exp()).sum();
                for j in 0..=i {
                    a[(i, j)] = (scores[(i, j)] - m).exp() / z;
                }
            }
            let vo = &x * to_na(&head.w_v) * to_na(&head.w_o);
            attn_total += &a * &vo;
            norms_l.push((0..t).map(|j| (a[(t - 1, j)] * vo.row(j)).norm()).collect());
            rows_l.push((0..t).map(|j| a[(t - 1, j)]).collect());
        }
        let pre = (&attn_total + &x) * to_na(&layer.w_in);
        let act = pre.map(|v| match cfg.activation {
            Activation::Relu => v.max(0.0),
            Activation::Silu => v / (1.0 + (-v).exp()),
        });
        let mlp = act * to_na(&layer.w_out);
        x = x + attn_total + mlp;
        final_norms.push(norms_l);
        final_rows.push(rows_l);
    }
    let logits = x.row(t - 1) * to_na(&w.unembedding);
    let m = logits.max();
    let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
    let probs = logits.iter().map(|v| (v - m).exp() / z).collect();
    OracleOutput { probs, final_norms, final_rows }
}
