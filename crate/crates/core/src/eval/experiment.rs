//! Repeated split/train/score loops for every predictor.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auroc, mean_stderr, risk_at, RiskEnd};
use super::splits::{make_splits, Split, SplitPlan};
use super::EvalError;
use crate::features::{assemble, ConfidenceMode, FeatureKind, FeatureMatrix};
use crate::probes::{
    combine_constraints, predict_confidence, predict_constant, predict_popularity, predict_proba, train_logistic_l1,
    DEFAULT_PENALTY_C,
};
use crate::trace::TraceDataset;

/// Fraction of test rows in each risk slice.
pub const RISK_FRACTION: f64 = 0.2;

/// Seeds for a standard evaluation run.
pub const DEFAULT_SEEDS: usize = 10;

/// Seeds for the layer-prefix sweep.
pub const SWEEP_SEEDS: usize = 3;

/// Seeds for pooled training across datasets.
pub const GENERALIZED_SEEDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictorSpec {
    /// L1 logistic probe on pooled attention features.
    SatProbe(FeatureKind),
    /// Probe on attention features plus model confidence.
    Combined(FeatureKind),
    /// Completion log-probability.
    Confidence,
    /// Majority class of the training labels.
    Constant,
    /// Entity popularity from record metadata.
    Popularity,
}

impl PredictorSpec {
    pub fn name(&self) -> String {
        let kind = |k: &FeatureKind| match k {
            FeatureKind::Weights => "weights",
            FeatureKind::ContribNorms => "norms",
        };
        match self {
            PredictorSpec::SatProbe(k) => format!("satprobe_{}", kind(k)),
            PredictorSpec::Combined(k) => format!("combined_{}", kind(k)),
            PredictorSpec::Confidence => "confidence".into(),
            PredictorSpec::Constant => "constant".into(),
            PredictorSpec::Popularity => "popularity".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "satprobe_weights" => PredictorSpec::SatProbe(FeatureKind::Weights),
            "satprobe_norms" => PredictorSpec::SatProbe(FeatureKind::ContribNorms),
            "combined_weights" => PredictorSpec::Combined(FeatureKind::Weights),
            "combined_norms" => PredictorSpec::Combined(FeatureKind::ContribNorms),
            "confidence" => PredictorSpec::Confidence,
            "constant" => PredictorSpec::Constant,
            "popularity" => PredictorSpec::Popularity,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub penalty_c: f64,
    /// Number of leading layers to use; all layers when `None`.
    pub layer_limit: Option<usize>,
    pub confidence_mode: ConfidenceMode,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { penalty_c: DEFAULT_PENALTY_C, layer_limit: None, confidence_mode: ConfidenceMode::Sum }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeedMetrics {
    pub seed: usize,
    pub auroc: f64,
    pub risk_top: f64,
    pub risk_bottom: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mean, stderr) = mean_stderr(&values.collect::<Vec<_>>());
        Self { mean, stderr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictorReport {
    pub predictor: String,
    pub auroc: Summary,
    pub risk_top: Summary,
    pub risk_bottom: Summary,
    pub per_seed: Vec<SeedMetrics>,
}

impl PredictorReport {
    fn from_seeds(predictor: String, per_seed: Vec<SeedMetrics>) -> Self {
        Self {
            predictor,
            auroc: Summary::of(per_seed.iter().map(|m| m.auroc)),
            risk_top: Summary::of(per_seed.iter().map(|m| m.risk_top)),
            risk_bottom: Summary::of(per_seed.iter().map(|m| m.risk_bottom)),
            per_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub constraint: String,
    /// Fraction of records whose constraints are all satisfied.
    pub model_success: f64,
    pub n_seeds: usize,
    pub predictors: Vec<PredictorReport>,
}

impl EvalReport {
    pub fn predictor(&self, name: &str) -> Option<&PredictorReport> {
        self.predictors.iter().find(|p| p.predictor == name)
    }
}

/// Record-level correctness: every constraint satisfied.
pub fn record_labels(ds: &TraceDataset) -> Result<Vec<bool>, EvalError> {
    ds.records.iter().map(|r| r.all_satisfied().ok_or_else(|| EvalError::Unlabeled(r.id.clone()))).collect()
}

fn seed_metrics(seed: usize, scores: &[f64], labels: &[bool]) -> Result<SeedMetrics, EvalError> {
    Ok(SeedMetrics {
        seed,
        auroc: auroc(scores, labels)?,
        risk_top: risk_at(scores, labels, RISK_FRACTION, RiskEnd::Top)?,
        risk_bottom: risk_at(scores, labels, RISK_FRACTION, RiskEnd::Bottom)?,
    })
}

/// Per-record products of per-constraint probabilities, ordered as `records`.
fn record_products(fm: &FeatureMatrix, rows: &[usize], probs: &[f64], records: &[usize]) -> Result<Vec<f64>, EvalError> {
    let mut by_record: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&row, &p) in rows.iter().zip(probs) {
        by_record.entry(fm.record_index[row]).or_default().push(p.max(f64::MIN_POSITIVE));
    }
    records
        .iter()
        .map(|r| {
            let ps = by_record.get(r).map(Vec::as_slice).unwrap_or(&[]);
            Ok(combine_constraints(ps)?)
        })
        .collect()
}

/// Trains a probe on the train records of `fm` and scores the `test` records.
fn probe_scores(fm: &FeatureMatrix, train: &[usize], test: &[usize], penalty_c: f64) -> Result<Vec<f64>, EvalError> {
    let train_rows = fm.rows_for_records(&train.iter().copied().collect::<HashSet<_>>());
    let test_rows = fm.rows_for_records(&test.iter().copied().collect::<HashSet<_>>());
    let model = train_logistic_l1(fm, &train_rows, penalty_c)?;
    let probs = predict_proba(&model, &fm.select_rows(&test_rows)?)?;
    record_products(fm, &test_rows, &probs, test)
}

enum Scorer {
    Probe(FeatureMatrix),
    Fixed(Vec<f64>),
    Constant,
}

impl Scorer {
    fn prepare(
        ds: &TraceDataset,
        spec: PredictorSpec,
        settings: &ProbeSettings,
    ) -> Result<Self, EvalError> {
        let layers = ds.dims().map_or(0, |(l, _)| l);
        let limit = settings.layer_limit.unwrap_or(layers);
        Ok(match spec {
            PredictorSpec::SatProbe(kind) => Scorer::Probe(assemble(ds, kind, limit, None)?),
            PredictorSpec::Combined(kind) => Scorer::Probe(assemble(ds, kind, limit, Some(settings.confidence_mode))?),
            PredictorSpec::Confidence => Scorer::Fixed(predict_confidence(ds, settings.confidence_mode)),
            PredictorSpec::Popularity => Scorer::Fixed(predict_popularity(ds)?),
            PredictorSpec::Constant => Scorer::Constant,
        })
    }

    fn score(&self, split: &Split, labels: &[bool], penalty_c: f64) -> Result<Vec<f64>, EvalError> {
        match self {
            Scorer::Probe(fm) => probe_scores(fm, &split.train, &split.test, penalty_c),
            Scorer::Fixed(all) => Ok(split.test.iter().map(|&i| all[i]).collect()),
            Scorer::Constant => {
                let train: Vec<bool> = split.train.iter().map(|&i| labels[i]).collect();
                Ok(vec![predict_constant(&train); split.test.len()])
            }
        }
    }
}

fn evaluate(scorer: &Scorer, splits: &[Split], labels: &[bool], penalty_c: f64) -> Result<Vec<SeedMetrics>, EvalError> {
    splits
        .par_iter()
        .enumerate()
        .map(|(s, split)| {
            let scores = scorer.score(split, labels, penalty_c)?;
            let test_labels: Vec<bool> = split.test.iter().map(|&i| labels[i]).collect();
            seed_metrics(s, &scores, &test_labels)
        })
        .collect()
}

fn model_name(ds: &TraceDataset) -> String {
    ds.records.first().map(|r| r.meta.model_name.clone()).unwrap_or_default()
}

fn success_rate(labels: &[bool]) -> f64 {
    labels.iter().filter(|&&y| y).count() as f64 / labels.len().max(1) as f64
}

/// Evaluates each predictor over `n_seeds` splits of `ds`.
pub fn run_experiment(
    ds: &TraceDataset,
    dataset_name: &str,
    predictors: &[PredictorSpec],
    plan: &SplitPlan,
    n_seeds: usize,
    settings: &ProbeSettings,
) -> Result<EvalReport, EvalError> {
    if ds.is_empty() {
        return Err(EvalError::Empty("dataset has no records".into()));
    }
    let labels = record_labels(ds)?;
    let splits = make_splits(ds, plan, n_seeds)?;
    let mut reports = Vec::with_capacity(predictors.len());
    for &spec in predictors {
        let scorer = Scorer::prepare(ds, spec, settings)?;
        let per_seed = evaluate(&scorer, &splits, &labels, settings.penalty_c)?;
        reports.push(PredictorReport::from_seeds(spec.name(), per_seed));
    }
    Ok(EvalReport {
        model: model_name(ds),
        dataset: dataset_name.to_string(),
        constraint: "all".into(),
        model_success: success_rate(&labels),
        n_seeds,
        predictors: reports,
    })
}

/// Probe quality when only the first `p` layers are used, for each `p` in `layer_limits`.
pub fn early_stopping_sweep(
    ds: &TraceDataset,
    kind: FeatureKind,
    layer_limits: &[usize],
    plan: &SplitPlan,
    n_seeds: usize,
    settings: &ProbeSettings,
) -> Result<Vec<(usize, PredictorReport)>, EvalError> {
    let labels = record_labels(ds)?;
    let splits = make_splits(ds, plan, n_seeds)?;
    let layers = ds.dims().map_or(0, |(l, _)| l);
    let full = assemble(ds, kind, layers, None)?;
    layer_limits
        .iter()
        .map(|&p| {
            let scorer = Scorer::Probe(full.truncate_layers(p)?);
            let per_seed = evaluate(&scorer, &splits, &labels, settings.penalty_c)?;
            Ok((p, PredictorReport::from_seeds(PredictorSpec::SatProbe(kind).name(), per_seed)))
        })
        .collect()
}

/// One probe per seed trained on the union of every dataset's train half,
/// then scored on each dataset's own test half.
pub fn generalized_experiment(
    datasets: &[(&str, &TraceDataset)],
    kind: FeatureKind,
    plan: &SplitPlan,
    n_seeds: usize,
    settings: &ProbeSettings,
) -> Result<Vec<EvalReport>, EvalError> {
    if datasets.is_empty() {
        return Err(EvalError::Empty("no datasets to pool".into()));
    }
    let dims = datasets[0].1.dims();
    if let Some((name, _)) = datasets.iter().find(|(_, ds)| ds.dims() != dims) {
        return Err(EvalError::Incompatible(format!("dataset {name} has different layer/head counts")));
    }
    let layers = dims.map_or(0, |(l, _)| l);
    let limit = settings.layer_limit.unwrap_or(layers);

    let mut labels = Vec::new();
    let mut offsets = Vec::new();
    let mut fms = Vec::new();
    let mut splits = Vec::new();
    let mut total = 0;
    for (_, ds) in datasets {
        labels.push(record_labels(ds)?);
        fms.push(assemble(ds, kind, limit, None)?);
        splits.push(make_splits(ds, plan, n_seeds)?);
        offsets.push(total);
        total += ds.len();
    }
    let pooled = FeatureMatrix::concat(&fms.iter().collect::<Vec<_>>(), &offsets)?;

    let per_seed: Vec<Vec<SeedMetrics>> = (0..n_seeds)
        .into_par_iter()
        .map(|s| {
            let train: HashSet<usize> = splits
                .iter()
                .zip(&offsets)
                .flat_map(|(sp, &off)| sp[s].train.iter().map(move |&i| i + off))
                .collect();
            let train_rows = pooled.rows_for_records(&train);
            let model = train_logistic_l1(&pooled, &train_rows, settings.penalty_c)?;
            splits
                .iter()
                .zip(&offsets)
                .zip(&labels)
                .map(|((sp, &off), lab)| {
                    let test: Vec<usize> = sp[s].test.iter().map(|&i| i + off).collect();
                    let test_rows = pooled.rows_for_records(&test.iter().copied().collect());
                    let probs = predict_proba(&model, &pooled.select_rows(&test_rows)?)?;
                    let scores = record_products(&pooled, &test_rows, &probs, &test)?;
                    let test_labels: Vec<bool> = sp[s].test.iter().map(|&i| lab[i]).collect();
                    seed_metrics(s, &scores, &test_labels)
                })
                .collect::<Result<Vec<_>, EvalError>>()
        })
        .collect::<Result<_, _>>()?;

    Ok(datasets
        .iter()
        .enumerate()
        .map(|(d, (name, ds))| EvalReport {
            model: model_name(ds),
            dataset: name.to_string(),
            constraint: "all".into(),
            model_success: success_rate(&labels[d]),
            n_seeds,
            predictors: vec![PredictorReport::from_seeds(
                PredictorSpec::SatProbe(kind).name(),
                per_seed.iter().map(|row| row[d]).collect(),
            )],
        })
        .collect())
}
