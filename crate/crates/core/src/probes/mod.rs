//! Constraint-satisfaction probes and the baselines they are compared to.

mod baselines;
pub mod lasso;
pub mod logistic;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use baselines::{combine_constraints, predict_confidence, predict_constant, predict_popularity};
pub use lasso::{fit_lasso, LassoFit, LassoOptions};
pub use logistic::{fit_l1_logistic, l1_logistic_objective, LogisticFit, SolverOptions};

use crate::features::{FeatureError, FeatureKind, FeatureMatrix, Standardizer};
use crate::linalg::Matrix;
use crate::scalar::sigmoid;

/// Inverse L1 penalty weight used unless configured otherwise.
pub const DEFAULT_PENALTY_C: f64 = 0.05;

/// Lasso strength used for popularity regression.
pub const DEFAULT_LASSO_ALPHA: f64 = 0.005;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("training rows contain a single class; use the constant predictor instead")]
    SingleClass,
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("penalty_C must be positive and finite, got {0}")]
    BadPenalty(f64),
    #[error("column mismatch: model expects {expected} columns, features have {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("no probabilities to combine")]
    Empty,
    #[error("popularity baseline unavailable: record {0} has no popularity")]
    PopularityUnavailable(String),
    #[error("{targets} targets for {rows} rows")]
    TargetLength { targets: usize, rows: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("probe file {path}: {message}")]
    File { path: String, message: String },
}

/// Sparse linear probe `σ(wᵀz + b)` over standardized features `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeModel {
    pub feature_kind: FeatureKind,
    /// Whether the confidence column is part of the input (the combined predictor).
    pub with_confidence: bool,
    pub layer_limit: usize,
    pub penalty_c: f64,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Penalized training objective at the returned solution.
    pub train_objective: f64,
}

impl ProbeModel {
    pub fn lambda(&self) -> f64 {
        1.0 / self.penalty_c
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    fn check_columns(&self, fm: &FeatureMatrix) -> Result<(), ProbeError> {
        if fm.n_columns() != self.weights.len() || fm.confidence.is_some() != self.with_confidence {
            return Err(ProbeError::ColumnMismatch { expected: self.weights.len(), found: fm.n_columns() });
        }
        Ok(())
    }

    /// Affine scores `wᵀz + b` for every row.
    pub fn decision_function(&self, fm: &FeatureMatrix) -> Result<Vec<f64>, ProbeError> {
        self.check_columns(fm)?;
        Ok((0..fm.n_rows())
            .map(|i| {
                let z = self.standardizer.transform_row(&fm.design_row(i));
                crate::linalg::dot(&z, &self.weights) + self.bias
            })
            .collect())
    }

    /// Penalized objective of this model recomputed on `rows` of `fm`.
    pub fn objective_on(&self, fm: &FeatureMatrix, rows: &[usize]) -> Result<f64, ProbeError> {
        let probs = predict_proba(self, &fm.select_rows(rows)?)?;
        let loss: f64 = rows
            .iter()
            .zip(&probs)
            .map(|(&r, &p)| if fm.labels[r] { -p.ln() } else { -(1.0 - p).ln() })
            .sum();
        Ok(loss + self.lambda() * self.l1_norm())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProbeError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&ProbeFile::from(self)).expect("probe serializes");
        fs::write(path, text + "\n")
            .map_err(|e| ProbeError::File { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProbeError> {
        let path = path.as_ref();
        let err = |message: String| ProbeError::File { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: ProbeFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        file.into_model().map_err(err)
    }
}

/// On-disk probe representation with sparse weights.
#[derive(Serialize, Deserialize)]
struct ProbeFile {
    kind: String,
    features: FeatureKind,
    layer_limit: usize,
    #[serde(rename = "penalty_C")]
    penalty_c: f64,
    standardizer: Standardizer,
    n_columns: usize,
    w: Vec<(usize, f64)>,
    b: f64,
    train_objective: f64,
}

impl From<&ProbeModel> for ProbeFile {
    fn from(m: &ProbeModel) -> Self {
        ProbeFile {
            kind: if m.with_confidence { "combined" } else { "satprobe" }.to_string(),
            features: m.feature_kind,
            layer_limit: m.layer_limit,
            penalty_c: m.penalty_c,
            standardizer: m.standardizer.clone(),
            n_columns: m.weights.len(),
            w: m.weights.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect(),
            b: m.bias,
            train_objective: m.train_objective,
        }
    }
}

impl ProbeFile {
    fn into_model(self) -> Result<ProbeModel, String> {
        let with_confidence = match self.kind.as_str() {
            "satprobe" => false,
            "combined" => true,
            other => return Err(format!("unknown probe kind {other}")),
        };
        if self.standardizer.n_columns() != self.n_columns {
            return Err("standardizer width differs from n_columns".into());
        }
        let mut weights = vec![0.0; self.n_columns];
        for (i, v) in self.w {
            *weights.get_mut(i).ok_or_else(|| format!("weight index {i} out of range"))? = v;
        }
        Ok(ProbeModel {
            feature_kind: self.features,
            with_confidence,
            layer_limit: self.layer_limit,
            penalty_c: self.penalty_c,
            standardizer: self.standardizer,
            weights,
            bias: self.b,
            train_objective: self.train_objective,
        })
    }
}

/// Fits an L1 logistic probe on `train_rows`, standardizing with statistics
/// from those rows only. The penalty weight is `1 / penalty_c`.
pub fn train_logistic_l1(fm: &FeatureMatrix, train_rows: &[usize], penalty_c: f64) -> Result<ProbeModel, ProbeError> {
    train_logistic_l1_with(fm, train_rows, penalty_c, &SolverOptions::default())
}

pub fn train_logistic_l1_with(
    fm: &FeatureMatrix,
    train_rows: &[usize],
    penalty_c: f64,
    opts: &SolverOptions,
) -> Result<ProbeModel, ProbeError> {
    if !(penalty_c > 0.0 && penalty_c.is_finite()) {
        return Err(ProbeError::BadPenalty(penalty_c));
    }
    if train_rows.len() < 2 {
        return Err(ProbeError::TooFewRows { needed: 2, got: train_rows.len() });
    }
    let train = fm.select_rows(train_rows)?;
    if train.labels.iter().all(|&y| y) || train.labels.iter().all(|&y| !y) {
        return Err(ProbeError::SingleClass);
    }
    let standardizer = Standardizer::fit(fm, train_rows)?;
    let z = standardizer.apply(&train)?.design_matrix();
    let fit = fit_l1_logistic(&z, &train.labels, 1.0 / penalty_c, opts);
    Ok(ProbeModel {
        feature_kind: fm.kind,
        with_confidence: fm.confidence.is_some(),
        layer_limit: fm.layer_limit,
        penalty_c,
        standardizer,
        weights: fit.weights,
        bias: fit.bias,
        train_objective: fit.objective,
    })
}

/// Per-row satisfaction probabilities.
pub fn predict_proba(m: &ProbeModel, fm: &FeatureMatrix) -> Result<Vec<f64>, ProbeError> {
    Ok(m.decision_function(fm)?.into_iter().map(sigmoid).collect())
}

/// Lasso regressor on raw (unstandardized) features.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub alpha: f64,
}

impl LassoModel {
    pub fn predict(&self, fm: &FeatureMatrix) -> Result<Vec<f64>, ProbeError> {
        if fm.n_columns() != self.weights.len() {
            return Err(ProbeError::ColumnMismatch { expected: self.weights.len(), found: fm.n_columns() });
        }
        Ok((0..fm.n_rows()).map(|i| crate::linalg::dot(&fm.design_row(i), &self.weights) + self.bias).collect())
    }
}

/// Regresses `targets` (one per row of `fm`) on the features.
pub fn train_lasso(fm: &FeatureMatrix, targets: &[f64], alpha: f64) -> Result<LassoModel, ProbeError> {
    if fm.n_rows() < 2 {
        return Err(ProbeError::TooFewRows { needed: 2, got: fm.n_rows() });
    }
    if targets.len() != fm.n_rows() {
        return Err(ProbeError::TargetLength { targets: targets.len(), rows: fm.n_rows() });
    }
    let x: Matrix<f64> = fm.design_matrix();
    let fit = fit_lasso(&x, targets, alpha, &LassoOptions::default());
    Ok(LassoModel { weights: fit.weights, bias: fit.bias, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::RowKey;

    pub(crate) fn fm_from(rows: &[Vec<f64>], labels: &[bool]) -> FeatureMatrix {
        let n = rows.len();
        FeatureMatrix {
            kind: FeatureKind::Weights,
            layer_limit: 1,
            n_heads: rows[0].len(),
            row_keys: (0..n).map(|i| RowKey { record_id: format!("r{i}"), constraint: "c".into() }).collect(),
            record_index: (0..n).collect(),
            values: Matrix::from_rows(rows),
            confidence: None,
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn separable_probe() {
        let fm = fm_from(&[vec![-1.0], vec![1.0]], &[false, true]);
        let m = train_logistic_l1(&fm, &[0, 1], 100.0).unwrap();
        assert!(m.weights[0] > 0.0);
        let p = predict_proba(&m, &fm).unwrap();
        assert!(p[0] < 0.5 && p[1] > 0.5);
    }

    #[test]
    fn tiny_penalty_c_zeroes_weights() {
        let fm = fm_from(&[vec![-1.0], vec![1.0], vec![0.5], vec![-0.2]], &[false, true, true, false]);
        let m = train_logistic_l1(&fm, &[0, 1, 2, 3], 1e-9).unwrap();
        assert_eq!(m.weights, vec![0.0]);
        let p = predict_proba(&m, &fm).unwrap();
        assert!(p.iter().all(|&v| (v - p[0]).abs() < 1e-15));
    }

    #[test]
    fn fixed_models() {
        let fm = fm_from(&[vec![3.0], vec![-2.0]], &[true, false]);
        let std = Standardizer::fit(&fm, &[0, 1]).unwrap();
        let mut m = ProbeModel {
            feature_kind: FeatureKind::Weights,
            with_confidence: false,
            layer_limit: 1,
            penalty_c: 1.0,
            standardizer: std,
            weights: vec![0.0],
            bias: 0.0,
            train_objective: 0.0,
        };
        assert_eq!(predict_proba(&m, &fm).unwrap(), vec![0.5, 0.5]);
        m.bias = 3f64.ln();
        for p in predict_proba(&m, &fm).unwrap() {
            assert!((p - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn error_paths() {
        let fm = fm_from(&[vec![1.0], vec![2.0], vec![3.0]], &[true, true, false]);
        assert!(matches!(train_logistic_l1(&fm, &[0, 1], 0.05), Err(ProbeError::SingleClass)));
        assert!(matches!(train_logistic_l1(&fm, &[0], 0.05), Err(ProbeError::TooFewRows { .. })));
        assert!(matches!(train_logistic_l1(&fm, &[0, 2], 0.0), Err(ProbeError::BadPenalty(_))));
        let m = train_logistic_l1(&fm, &[0, 1, 2], 0.05).unwrap();
        let wide = fm_from(&[vec![1.0, 2.0]], &[true]);
        assert!(matches!(predict_proba(&m, &wide), Err(ProbeError::ColumnMismatch { .. })));
    }

    #[test]
    fn save_and_load() {
        let fm = fm_from(
            &[vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 0.5], vec![0.0, 0.2]],
            &[true, true, false, false],
        );
        let m = train_logistic_l1(&fm, &[0, 1, 2, 3], 10.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("probe.json");
        m.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"penalty_C\""));
        assert_eq!(ProbeModel::load(&path).unwrap(), m);
    }

    #[test]
    fn lasso_degenerate_sizes() {
        let fm = fm_from(&[vec![1.0]], &[true]);
        assert!(train_lasso(&fm, &[1.0], 0.1).is_err());
        let fm = fm_from(&[vec![1.0], vec![2.0]], &[true, true]);
        assert!(train_lasso(&fm, &[1.0], 0.1).is_err());
        let m = train_lasso(&fm, &[1.0, 3.0], 1e9).unwrap();
        assert_eq!(m.weights, vec![0.0]);
        assert_eq!(m.predict(&fm).unwrap(), vec![2.0, 2.0]);
    }
}
