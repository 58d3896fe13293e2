use super::ProbeError;
use crate::features::ConfidenceMode;
use crate::trace::TraceDataset;

/// Record-level probability that every constraint holds: `Π_k p_k`.
pub fn combine_constraints(probs: &[f64]) -> Result<f64, ProbeError> {
    if probs.is_empty() {
        return Err(ProbeError::Empty);
    }
    if let Some(&bad) = probs.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(ProbeError::BadProbability(bad));
    }
    Ok(probs.iter().product())
}

/// Model confidence per record, as a completion log-probability.
pub fn predict_confidence(ds: &TraceDataset, mode: ConfidenceMode) -> Vec<f64> {
    ds.records
        .iter()
        .map(|r| {
            if r.completion_logprobs.is_empty() {
                log::warn!("record {} has an empty completion; confidence score is 0", r.id);
            }
            mode.score(&r.completion_logprobs)
        })
        .collect()
}

/// Majority class of the training labels (ties go to 1), as a constant score.
pub fn predict_constant(labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&y| y).count();
    if 2 * positives >= labels.len() {
        1.0
    } else {
        0.0
    }
}

/// Site-link popularity per record.
pub fn predict_popularity(ds: &TraceDataset) -> Result<Vec<f64>, ProbeError> {
    ds.records
        .iter()
        .map(|r| r.meta.popularity.map(|p| p as f64).ok_or_else(|| ProbeError::PopularityUnavailable(r.id.clone())))
        .collect()
}
