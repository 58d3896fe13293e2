//! Trace datasets with a planted linear signal in the attention features.
//!
//! Each record draws a latent `z ~ N(0, I)` with one entry per (layer, head).
//! The constraint token receives attention `0.5 + z/25` from that head, the
//! second span token a fixed small weight, and the rest of the mass is spread
//! evenly. The label is `Bernoulli(σ(w*ᵀz))` for a sparse `w*`, so `w*ᵀz` is
//! the Bayes-optimal score.

use std::ops::Range;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};

use crate::linalg::Matrix;
use crate::scalar::sigmoid;
use crate::trace::{ConstraintSpec, TraceDataset, TraceMeta, TraceRecord, VerifierKind};

/// Prompt length of every planted record.
pub const PLANTED_PROMPT_LEN: usize = 6;
const SECOND_SPAN_WEIGHT: f64 = 0.01;
const VALUE_NORM: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_records: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Fraction of nonzero entries in `w*`.
    pub density: f64,
    /// Absolute value of each nonzero entry.
    pub magnitude: f64,
    /// Layers allowed to carry signal.
    pub signal_layers: Range<usize>,
    /// Ratio of signal to noise standard deviation in the popularity field.
    pub popularity_snr: f64,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn new(n_records: usize, n_layers: usize, n_heads: usize, seed: u64) -> Self {
        Self {
            n_records,
            n_layers,
            n_heads,
            density: 0.1,
            magnitude: 2.0,
            signal_layers: 0..n_layers,
            popularity_snr: 5.0,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlantedFixture {
    pub dataset: TraceDataset,
    /// Planted weights, layer-major over (layer, head).
    pub w_star: Vec<f64>,
    /// Latent draws, one row per record.
    pub latent: Matrix<f64>,
    /// `w*ᵀz` per record.
    pub bayes_scores: Vec<f64>,
    /// Noise-free popularity signal per record, before noise and rounding.
    pub popularity_signal: Vec<f64>,
}

pub fn planted_dataset(cfg: &PlantedConfig) -> PlantedFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (l, h) = (cfg.n_layers, cfg.n_heads);
    let p = l * h;
    let allowed: Vec<usize> = (cfg.signal_layers.start * h..cfg.signal_layers.end.min(l) * h).collect();
    let k = ((cfg.density * p as f64).round() as usize).clamp(usize::from(!allowed.is_empty()), allowed.len());
    let mut w_star = vec![0.0; p];
    for i in sample(&mut rng, allowed.len(), k) {
        w_star[allowed[i]] = if rng.random_bool(0.5) { cfg.magnitude } else { -cfg.magnitude };
    }
    let w_norm = w_star.iter().map(|w| w * w).sum::<f64>().sqrt().max(1.0);
    let pop_noise = Normal::new(0.0, 10.0 / cfg.popularity_snr).expect("finite noise scale");

    let mut latent = Matrix::zeros(cfg.n_records, p);
    let mut bayes_scores = Vec::with_capacity(cfg.n_records);
    let mut popularity_signal = Vec::with_capacity(cfg.n_records);
    let mut records = Vec::with_capacity(cfg.n_records);
    for r in 0..cfg.n_records {
        let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let score: f64 = z.iter().zip(&w_star).map(|(a, b)| a * b).sum();
        let label = Bernoulli::new(sigmoid(score)).expect("probability").sample(&mut rng);
        let conf_noise: f64 = StandardNormal.sample(&mut rng);
        let pop_signal = 100.0 + 10.0 * score / w_norm;
        let popularity = (pop_signal + pop_noise.sample(&mut rng)).round().max(0.0) as u64;

        latent.row_mut(r).copy_from_slice(&z);
        bayes_scores.push(score);
        popularity_signal.push(pop_signal);
        records.push(planted_record(r, l, h, &z, label, sigmoid(0.5 * score + conf_noise), popularity));
    }
    let dataset = TraceDataset::new(records).expect("planted records are valid");
    PlantedFixture { dataset, w_star, latent, bayes_scores, popularity_signal }
}

fn planted_record(
    r: usize,
    l: usize,
    h: usize,
    z: &[f64],
    label: bool,
    confidence: f64,
    popularity: u64,
) -> TraceRecord {
    let t = PLANTED_PROMPT_LEN;
    let mut weights = Vec::with_capacity(l);
    let mut norms = Vec::with_capacity(l);
    for layer in 0..l {
        let (mut lw, mut ln) = (Vec::with_capacity(h), Vec::with_capacity(h));
        for head in 0..h {
            let a = 0.5 + z[layer * h + head].clamp(-12.0, 12.0) / 25.0;
            let rest = (1.0 - a - SECOND_SPAN_WEIGHT) / (t - 2) as f64;
            let mut row = vec![rest; t];
            row[1] = a;
            row[2] = SECOND_SPAN_WEIGHT;
            ln.push(row.iter().map(|w| w * VALUE_NORM).collect());
            lw.push(row);
        }
        weights.push(lw);
        norms.push(ln);
    }
    let answer = if label { "yes" } else { "no" };
    TraceRecord {
        id: format!("planted-{r}"),
        prompt_tokens: vec!["q".into(), format!("e{r}"), format!("f{r}"), "is".into(), "it".into(), "?".into()],
        constraints: vec![ConstraintSpec {
            name: "c0".into(),
            token_start: 1,
            token_end: 3,
            verifier: VerifierKind::ExactMatch,
            target: "yes".into(),
            satisfied: Some(label),
        }],
        completion_tokens: vec![answer.into()],
        completion_logprobs: vec![confidence.max(f64::MIN_POSITIVE).ln()],
        attn_weights: weights,
        attn_contrib_norms: norms,
        meta: TraceMeta { popularity: Some(popularity), ..TraceMeta::new("planted", l, h, 8) },
    }
}
