//! From query prompts to labeled attention traces with the reference model.

use rayon::prelude::*;

use crate::datasets::{resolve_span, tokenize, verify_constraint, DatasetError, KnowledgeBase, QueryPrompt, Vocab};
use crate::tinylm::{capture_to_trace, generate_greedy, ModelError, ModelWeights};
use crate::trace::{ConstraintSpec, TraceDataset, TraceError, TraceMeta, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("prompt {id}: constraint {name} does not align with token boundaries")]
    Span { id: String, name: String },
    #[error("vocabulary has {vocab} tokens but the model only {model}")]
    VocabTooLarge { vocab: usize, model: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub max_new_tokens: usize,
    pub model_name: String,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { max_new_tokens: 3, model_name: "tinylm".into() }
    }
}

/// Vocabulary over every prompt token, every target token and `extra` words,
/// in that order of first appearance.
pub fn build_vocab<T: AsRef<str>>(prompts: &[QueryPrompt], extra: &[T]) -> Vocab {
    let mut tokens: Vec<String> = Vec::new();
    for p in prompts {
        tokens.extend(tokenize(&p.text).into_iter().map(|t| t.text));
    }
    for c in prompts.iter().flat_map(|p| &p.constraints) {
        let value = c.target.split_once('=').map_or(c.target.as_str(), |(_, v)| v);
        for alt in value.split('|') {
            tokens.extend(tokenize(alt).into_iter().map(|t| t.text));
        }
    }
    tokens.extend(extra.iter().flat_map(|w| tokenize(w.as_ref())).map(|t| t.text));
    Vocab::new(tokens)
}

/// Labels every constraint of `record` from its completion.
pub fn label_record(record: &mut TraceRecord, kb: Option<&KnowledgeBase>) -> Result<(), DatasetError> {
    for c in &mut record.constraints {
        c.satisfied = Some(verify_constraint(c, &record.completion_tokens, kb)?);
    }
    Ok(())
}

pub fn trace_prompt(
    prompt: &QueryPrompt,
    weights: &ModelWeights<f64>,
    vocab: &Vocab,
    opts: &TraceOptions,
    kb: Option<&KnowledgeBase>,
) -> Result<TraceRecord, PipelineError> {
    let tokens = tokenize(&prompt.text);
    let ids = vocab.encode(&tokens);
    let generation = generate_greedy(weights, &ids, opts.max_new_tokens)?;
    let constraints = prompt
        .constraints
        .iter()
        .map(|c| {
            let span = resolve_span(&tokens, &c.char_range)
                .ok_or_else(|| PipelineError::Span { id: prompt.id.clone(), name: c.name.clone() })?;
            Ok(ConstraintSpec {
                name: c.name.clone(),
                token_start: span.start,
                token_end: span.end,
                verifier: c.verifier,
                target: c.target.clone(),
                satisfied: None,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let cfg = &weights.config;
    let meta = TraceMeta {
        popularity: prompt.popularity,
        constrainedness: prompt.constrainedness,
        ..TraceMeta::new(opts.model_name.clone(), cfg.n_layers, cfg.n_heads, cfg.d_model)
    };
    let mut record = capture_to_trace(
        &generation.prompt_capture,
        prompt.id.clone(),
        tokens.into_iter().map(|t| t.text).collect(),
        constraints,
        generation.tokens.iter().map(|&t| vocab.token(t).to_string()).collect(),
        generation.logprobs.clone(),
        meta,
    )?;
    label_record(&mut record, kb)?;
    Ok(record)
}

/// Runs the model over every prompt, in parallel, keeping prompt order.
pub fn trace_prompts(
    prompts: &[QueryPrompt],
    weights: &ModelWeights<f64>,
    vocab: &Vocab,
    opts: &TraceOptions,
    kb: Option<&KnowledgeBase>,
) -> Result<TraceDataset, PipelineError> {
    if vocab.len() > weights.config.vocab_size {
        return Err(PipelineError::VocabTooLarge { vocab: vocab.len(), model: weights.config.vocab_size });
    }
    let records = prompts
        .par_iter()
        .map(|p| trace_prompt(p, weights, vocab, opts, kb))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TraceDataset::new(records)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::build_words_dataset;
    use crate::tinylm::{init_random, ModelConfig};

    #[test]
    fn words_prompts_trace_and_label() {
        let prompts = build_words_dataset("abc").unwrap();
        let vocab = build_vocab(&prompts, &["cab", "abc", "bad"]);
        let w: ModelWeights<f64> = init_random(&ModelConfig::new(vocab.len(), 8, 2, 2).with_seed(5)).unwrap();
        let ds = trace_prompts(&prompts, &w, &vocab, &TraceOptions::default(), None).unwrap();
        assert_eq!(ds.len(), 18);
        for r in &ds.records {
            assert_eq!(r.constraints.len(), 2);
            assert!(r.constraints.iter().all(|c| c.satisfied.is_some() && c.token_end == c.token_start + 1));
            assert_eq!(r.completion_tokens.len(), 3);
        }
        let again = trace_prompts(&prompts, &w, &vocab, &TraceOptions::default(), None).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn small_model_vocab_is_rejected() {
        let prompts = build_words_dataset("ab").unwrap();
        let vocab = build_vocab::<&str>(&prompts, &[]);
        let w: ModelWeights<f64> = init_random(&ModelConfig::new(3, 4, 1, 1)).unwrap();
        assert!(matches!(
            trace_prompts(&prompts, &w, &vocab, &TraceOptions::default(), None),
            Err(PipelineError::VocabTooLarge { .. })
        ));
    }
}
