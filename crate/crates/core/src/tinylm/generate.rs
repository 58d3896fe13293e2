use super::{forward, ForwardCapture, ModelError, ModelWeights};
use crate::linalg::l2_norm;
use crate::trace::{ConstraintSpec, TraceMeta, TraceRecord};
use crate::Scalar;

/// Result of greedy decoding.
#[derive(Clone, Debug)]
pub struct Generation<S> {
    pub tokens: Vec<usize>,
    /// Natural log of each emitted token's probability.
    pub logprobs: Vec<S>,
    /// Capture of the forward pass over the prompt alone.
    pub prompt_capture: ForwardCapture<S>,
}

/// Argmax of a log-distribution, lowest id on ties. Returns `(id, logprob)`.
pub fn pick_greedy<S: Scalar>(logprobs: &[S]) -> (usize, S) {
    let mut best = 0;
    for (i, &lp) in logprobs.iter().enumerate().skip(1) {
        if lp > logprobs[best] {
            best = i;
        }
    }
    (best, logprobs[best])
}

/// Greedily appends `max_new` tokens to `prompt`.
pub fn generate_greedy<S: Scalar>(
    w: &ModelWeights<S>,
    prompt: &[usize],
    max_new: usize,
) -> Result<Generation<S>, ModelError> {
    if max_new == 0 {
        return Err(ModelError::InvalidConfig("max_new must be at least 1".into()));
    }
    let prompt_capture = forward(w, prompt)?;
    let mut seq = prompt.to_vec();
    let mut tokens = Vec::with_capacity(max_new);
    let mut logprobs = Vec::with_capacity(max_new);
    let (tok, lp) = pick_greedy(&prompt_capture.next_token_logprobs);
    tokens.push(tok);
    logprobs.push(lp);
    seq.push(tok);
    while tokens.len() < max_new {
        let cap = forward(w, &seq)?;
        let (tok, lp) = pick_greedy(&cap.next_token_logprobs);
        tokens.push(tok);
        logprobs.push(lp);
        seq.push(tok);
    }
    Ok(Generation { tokens, logprobs, prompt_capture })
}

/// Packs a prompt capture into a trace record.
///
/// Weights are the final prompt position's attention row; contribution norms
/// are `‖A^{ℓ,h}_{T,j} (x_j W_V^{ℓ,h}) W_O^{ℓ,h}‖₂` for each position `j`.
pub fn capture_to_trace<S: Scalar>(
    cap: &ForwardCapture<S>,
    id: impl Into<String>,
    prompt_tokens: Vec<String>,
    constraints: Vec<ConstraintSpec>,
    completion_tokens: Vec<String>,
    completion_logprobs: Vec<f64>,
    meta: TraceMeta,
) -> Result<TraceRecord, ModelError> {
    let t = cap.seq_len();
    if prompt_tokens.len() != t {
        return Err(ModelError::ShapeMismatch(format!(
            "{} prompt tokens for a capture of length {t}",
            prompt_tokens.len()
        )));
    }
    if meta.n_layers != cap.n_layers() || meta.n_heads != cap.n_heads() {
        return Err(ModelError::ShapeMismatch(format!(
            "meta declares {}x{} layers/heads, capture has {}x{}",
            meta.n_layers,
            meta.n_heads,
            cap.n_layers(),
            cap.n_heads()
        )));
    }
    let last = t - 1;
    let mut weights = Vec::with_capacity(cap.n_layers());
    let mut norms = Vec::with_capacity(cap.n_layers());
    for l in 0..cap.n_layers() {
        let mut lw = Vec::with_capacity(cap.n_heads());
        let mut ln = Vec::with_capacity(cap.n_heads());
        for h in 0..cap.n_heads() {
            let row = cap.final_attention_row(l, h);
            lw.push(row.iter().map(|v| v.to_f64_lossy()).collect());
            ln.push((0..t).map(|j| l2_norm(&cap.head_contribution(l, h, last, j)).to_f64_lossy()).collect());
        }
        weights.push(lw);
        norms.push(ln);
    }
    let record = TraceRecord {
        id: id.into(),
        prompt_tokens,
        constraints,
        completion_tokens,
        completion_logprobs,
        attn_weights: weights,
        attn_contrib_norms: norms,
        meta,
    };
    record.validate()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinylm::{init_random, ModelConfig};
    use crate::trace::VerifierKind;

    fn constraint(start: usize, end: usize) -> ConstraintSpec {
        ConstraintSpec {
            name: "c".into(),
            token_start: start,
            token_end: end,
            verifier: VerifierKind::ExactMatch,
            target: "x".into(),
            satisfied: None,
        }
    }

    #[test]
    fn greedy_pick_rules() {
        let lps: Vec<f64> = [0.2, 0.7, 0.1].iter().map(|p: &f64| p.ln()).collect();
        let (id, lp) = pick_greedy(&lps);
        assert_eq!(id, 1);
        assert_eq!(lp, 0.7f64.ln());

        let tied = [-3.0, -9.0, -9.0, -1.0, -2.0, -1.0];
        assert_eq!(pick_greedy(&tied).0, 3);
    }

    #[test]
    fn greedy_is_deterministic() {
        let w: ModelWeights<f64> = init_random(&ModelConfig::new(9, 8, 2, 2).with_seed(5)).unwrap();
        let a = generate_greedy(&w, &[1, 2, 3], 4).unwrap();
        let b = generate_greedy(&w, &[1, 2, 3], 4).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.logprobs, b.logprobs);
        assert_eq!(a.tokens.len(), 4);
        assert!(a.logprobs.iter().all(|&lp| lp <= 0.0));
        // the first logprob comes from the prompt pass
        assert_eq!(a.logprobs[0], pick_greedy(&a.prompt_capture.next_token_logprobs).1);
        assert!(generate_greedy(&w, &[1], 0).is_err());
    }

    #[test]
    fn greedy_continuation_is_consistent() {
        // decoding k+1 tokens extends decoding k tokens
        let w: ModelWeights<f64> = init_random(&ModelConfig::new(9, 8, 2, 2).with_seed(6)).unwrap();
        let short = generate_greedy(&w, &[4, 4], 2).unwrap();
        let long = generate_greedy(&w, &[4, 4], 5).unwrap();
        assert_eq!(&long.tokens[..2], &short.tokens[..]);
        let mut prompt = vec![4, 4];
        prompt.extend(&short.tokens);
        let resumed = generate_greedy(&w, &prompt, 3).unwrap();
        assert_eq!(&long.tokens[2..], &resumed.tokens[..]);
    }

    #[test]
    fn trace_from_capture() {
        let cfg = ModelConfig::new(6, 4, 2, 2).with_seed(8);
        let w: ModelWeights<f64> = init_random(&cfg).unwrap();
        let cap = forward(&w, &[0]).unwrap();
        let rec = capture_to_trace(
            &cap,
            "one",
            vec!["a".into()],
            vec![constraint(0, 1)],
            vec![],
            vec![],
            TraceMeta::new("tinylm", 2, 2, 4),
        )
        .unwrap();
        assert_eq!(rec.attn_weights, vec![vec![vec![1.0]; 2]; 2]);
        assert_eq!(rec.attn_contrib_norms.len(), 2);
        assert_eq!(rec.attn_contrib_norms[0][0].len(), 1);

        let cap = forward(&w, &[0, 1, 2]).unwrap();
        let err = capture_to_trace(
            &cap,
            "bad",
            vec!["a".into()],
            vec![constraint(0, 1)],
            vec![],
            vec![],
            TraceMeta::new("tinylm", 2, 2, 4),
        );
        assert!(matches!(err, Err(ModelError::ShapeMismatch(_))));
    }

    #[test]
    fn zero_weight_gives_zero_norm() {
        // a huge query-key score on token 0 drives weight on token 1 to exactly zero
        let cfg = ModelConfig::new(2, 2, 1, 1);
        let mut w: ModelWeights<f64> = crate::tinylm::ModelWeights::zeros(&cfg).unwrap();
        w.embedding = crate::linalg::Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let head = &mut w.layers[0].heads[0];
        head.w_q = crate::linalg::Matrix::from_rows(&[vec![0.0, 0.0], vec![1e4, 0.0]]);
        head.w_k = crate::linalg::Matrix::from_rows(&[vec![1e4, 0.0], vec![-1e4, 0.0]]);
        head.w_v = crate::linalg::Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        head.w_o = crate::linalg::Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let cap = forward(&w, &[0, 1]).unwrap();
        assert_eq!(cap.final_attention_row(0, 0)[1], 0.0);
        let rec = capture_to_trace(
            &cap,
            "z",
            vec!["a".into(), "b".into()],
            vec![constraint(0, 1)],
            vec![],
            vec![],
            TraceMeta::new("tinylm", 1, 1, 2),
        )
        .unwrap();
        assert_eq!(rec.attn_contrib_norms[0][0][1], 0.0);
        assert!(rec.attn_contrib_norms[0][0][0] > 0.0);
    }
}
