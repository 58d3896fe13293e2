//! Evaluation protocol: splits, metrics, repeated experiments and exports.

pub mod analysis;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod splits;

pub use analysis::{bin_accuracy, bin_values, scaling_grid, scaling_grid_from, AccuracyBin, BinKey, Outcome, ScalingGrid};
pub use experiment::{
    early_stopping_sweep, generalized_experiment, record_labels, run_experiment, EvalReport, PredictorReport,
    PredictorSpec, ProbeSettings, SeedMetrics, Summary, DEFAULT_SEEDS, GENERALIZED_SEEDS, RISK_FRACTION, SWEEP_SEEDS,
};
pub use metrics::{auroc, average_ranks, mean_stderr, risk_at, spearman, RiskEnd};
pub use splits::{constraint_set_key, make_splits, Grouping, Split, SplitPlan};

use crate::features::FeatureError;
use crate::probes::ProbeError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("metric undefined: test labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0}")]
    Empty(String),
    #[error("fraction {0} outside the allowed range")]
    InvalidFraction(f64),
    #[error("split {seed} leaves the train or test side empty")]
    EmptySide { seed: usize },
    #[error("correlation undefined for constant input")]
    ConstantInput,
    #[error("record {0} is not labeled")]
    Unlabeled(String),
    #[error("record {id} has no {key}")]
    MissingKey { id: String, key: &'static str },
    #[error("{0}")]
    Incompatible(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
