//! Probe inputs: attention pooled over each constraint's tokens.
//!
//! For constraint `C` and head `(ℓ, h)` the feature is
//! `max_{c ∈ C} A^{ℓ,h}_{c,T}` (or the max contribution norm). Rows are laid
//! out layer-major, so truncating to the first `L'` layers is a prefix.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::trace::{TraceDataset, TraceRecord};

/// Standard deviations below this are treated as constant columns.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("record {id}: constraint index {k} out of range")]
    NoSuchConstraint { id: String, k: usize },
    #[error("record {id}: constraint {name} has an empty token span")]
    EmptySpan { id: String, name: String },
    #[error("layer limit {limit} outside 1..={layers}")]
    LayerLimit { limit: usize, layers: usize },
    #[error("unlabeled constraints in records: {}", .0.join(", "))]
    Unlabeled(Vec<String>),
    #[error("standardizer needs at least one training row")]
    EmptyTrainSet,
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
    #[error("column mismatch: expected {expected}, found {found}")]
    ColumnMismatch { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Attention weights `A`.
    Weights,
    /// Attention contribution norms `‖a‖`.
    ContribNorms,
}

impl FeatureKind {
    fn tensor(self, record: &TraceRecord) -> &crate::trace::Tensor3 {
        match self {
            FeatureKind::Weights => &record.attn_weights,
            FeatureKind::ContribNorms => &record.attn_contrib_norms,
        }
    }
}

/// How the model-confidence column is derived from completion log-probs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// `Σ log p`, the log of the completion probability.
    #[default]
    Sum,
    /// `Σ log p / n`, normalized by completion length.
    MeanPerToken,
}

impl ConfidenceMode {
    pub fn score(self, logprobs: &[f64]) -> f64 {
        let total: f64 = logprobs.iter().sum();
        match self {
            ConfidenceMode::Sum => total,
            ConfidenceMode::MeanPerToken if logprobs.is_empty() => 0.0,
            ConfidenceMode::MeanPerToken => total / logprobs.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RowKey {
    pub record_id: String,
    pub constraint: String,
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.record_id, self.constraint)
    }
}

/// One row per `(record, constraint)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub layer_limit: usize,
    pub n_heads: usize,
    pub row_keys: Vec<RowKey>,
    /// Position of each row's record in the source dataset.
    pub record_index: Vec<usize>,
    /// `rows × (layer_limit · n_heads)` pooled attention.
    pub values: Matrix<f64>,
    pub confidence: Option<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn n_attention_features(&self) -> usize {
        self.values.cols()
    }

    /// Attention features plus the confidence column when present.
    pub fn n_columns(&self) -> usize {
        self.values.cols() + usize::from(self.confidence.is_some())
    }

    pub fn design_row(&self, i: usize) -> Vec<f64> {
        let mut row = self.values.row(i).to_vec();
        if let Some(c) = &self.confidence {
            row.push(c[i]);
        }
        row
    }

    pub fn design_matrix(&self) -> Matrix<f64> {
        let rows: Vec<Vec<f64>> = (0..self.n_rows()).map(|i| self.design_row(i)).collect();
        if rows.is_empty() {
            return Matrix::zeros(0, self.n_columns());
        }
        Matrix::from_rows(&rows)
    }

    /// Keeps only the first `layers` layers of attention features.
    pub fn truncate_layers(&self, layers: usize) -> Result<FeatureMatrix, FeatureError> {
        if layers == 0 || layers > self.layer_limit {
            return Err(FeatureError::LayerLimit { limit: layers, layers: self.layer_limit });
        }
        let width = layers * self.n_heads;
        let data = (0..self.n_rows()).flat_map(|i| self.values.row(i)[..width].to_vec()).collect();
        Ok(FeatureMatrix { layer_limit: layers, values: Matrix::from_vec(self.n_rows(), width, data), ..self.clone() })
    }

    /// Sub-matrix of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<FeatureMatrix, FeatureError> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(FeatureError::RowOutOfRange(bad));
        }
        let width = self.values.cols();
        let data = rows.iter().flat_map(|&r| self.values.row(r).to_vec()).collect();
        Ok(FeatureMatrix {
            kind: self.kind,
            layer_limit: self.layer_limit,
            n_heads: self.n_heads,
            row_keys: rows.iter().map(|&r| self.row_keys[r].clone()).collect(),
            record_index: rows.iter().map(|&r| self.record_index[r]).collect(),
            values: Matrix::from_vec(rows.len(), width, data),
            confidence: self.confidence.as_ref().map(|c| rows.iter().map(|&r| c[r]).collect()),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        })
    }

    /// Rows whose record index is in `records`.
    pub fn rows_for_records(&self, records: &std::collections::HashSet<usize>) -> Vec<usize> {
        (0..self.n_rows()).filter(|i| records.contains(&self.record_index[*i])).collect()
    }

    /// Stacks matrices built from different datasets. Record indices of the
    /// `i`-th part are shifted by `offsets[i]`.
    pub fn concat(parts: &[&FeatureMatrix], offsets: &[usize]) -> Result<FeatureMatrix, FeatureError> {
        let first = parts.first().ok_or(FeatureError::EmptyTrainSet)?;
        let mut data = Vec::new();
        let mut out = FeatureMatrix {
            kind: first.kind,
            layer_limit: first.layer_limit,
            n_heads: first.n_heads,
            row_keys: Vec::new(),
            record_index: Vec::new(),
            values: Matrix::zeros(0, first.values.cols()),
            confidence: first.confidence.as_ref().map(|_| Vec::new()),
            labels: Vec::new(),
        };
        for (part, &offset) in parts.iter().zip(offsets) {
            if part.n_columns() != first.n_columns() || part.confidence.is_some() != first.confidence.is_some() {
                return Err(FeatureError::ColumnMismatch { expected: first.n_columns(), found: part.n_columns() });
            }
            data.extend_from_slice(part.values.as_slice());
            out.row_keys.extend(part.row_keys.iter().cloned());
            out.record_index.extend(part.record_index.iter().map(|r| r + offset));
            out.labels.extend_from_slice(&part.labels);
            if let (Some(dst), Some(src)) = (out.confidence.as_mut(), part.confidence.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        out.values = Matrix::from_vec(out.row_keys.len(), first.values.cols(), data);
        Ok(out)
    }

    /// Comma-separated export: `row_key,label[,confidence],f_0,...`.
    pub fn write_delimited(&self, out: &mut impl Write) -> io::Result<()> {
        write!(out, "row_key,label")?;
        if self.confidence.is_some() {
            write!(out, ",confidence")?;
        }
        for j in 0..self.values.cols() {
            write!(out, ",f_{j}")?;
        }
        writeln!(out)?;
        for i in 0..self.n_rows() {
            write!(out, "{},{}", self.row_keys[i], u8::from(self.labels[i]))?;
            if let Some(c) = &self.confidence {
                write!(out, ",{}", c[i])?;
            }
            for v in self.values.row(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Max-pools constraint `k` of `record` over its token span for the first `layer_limit` layers.
pub fn pool_constraint(
    record: &TraceRecord,
    k: usize,
    kind: FeatureKind,
    layer_limit: usize,
) -> Result<Vec<f64>, FeatureError> {
    let c = record
        .constraints
        .get(k)
        .ok_or_else(|| FeatureError::NoSuchConstraint { id: record.id.clone(), k })?;
    if c.token_start >= c.token_end {
        return Err(FeatureError::EmptySpan { id: record.id.clone(), name: c.name.clone() });
    }
    if layer_limit == 0 || layer_limit > record.n_layers() {
        return Err(FeatureError::LayerLimit { limit: layer_limit, layers: record.n_layers() });
    }
    let tensor = kind.tensor(record);
    let mut out = Vec::with_capacity(layer_limit * record.n_heads());
    for layer in &tensor[..layer_limit] {
        for row in layer {
            out.push(row[c.span()].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    Ok(out)
}

/// Sum of the pooled contribution norms over all layers and heads, summed over constraints.
pub fn attention_total(record: &TraceRecord) -> Result<f64, FeatureError> {
    let mut total = 0.0;
    for k in 0..record.constraints.len() {
        total += pool_constraint(record, k, FeatureKind::ContribNorms, record.n_layers())?.iter().sum::<f64>();
    }
    Ok(total)
}

/// Builds the labeled feature matrix for a dataset.
pub fn assemble(
    ds: &TraceDataset,
    kind: FeatureKind,
    layer_limit: usize,
    confidence: Option<ConfidenceMode>,
) -> Result<FeatureMatrix, FeatureError> {
    let unlabeled: Vec<String> = ds
        .records
        .iter()
        .filter(|r| r.constraints.iter().any(|c| c.satisfied.is_none()))
        .map(|r| r.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(FeatureError::Unlabeled(unlabeled));
    }
    let (layers, heads) = ds.dims().unwrap_or((layer_limit, 0));
    if layer_limit == 0 || layer_limit > layers {
        return Err(FeatureError::LayerLimit { limit: layer_limit, layers });
    }
    let width = layer_limit * heads;
    let mut fm = FeatureMatrix {
        kind,
        layer_limit,
        n_heads: heads,
        row_keys: Vec::new(),
        record_index: Vec::new(),
        values: Matrix::zeros(0, width),
        confidence: confidence.map(|_| Vec::new()),
        labels: Vec::new(),
    };
    let mut data = Vec::new();
    for (ri, record) in ds.records.iter().enumerate() {
        for (k, c) in record.constraints.iter().enumerate() {
            data.extend(pool_constraint(record, k, kind, layer_limit)?);
            fm.row_keys.push(RowKey { record_id: record.id.clone(), constraint: c.name.clone() });
            fm.record_index.push(ri);
            fm.labels.push(c.satisfied.expect("checked above"));
            if let (Some(col), Some(mode)) = (fm.confidence.as_mut(), confidence) {
                col.push(mode.score(&record.completion_logprobs));
            }
        }
    }
    fm.values = Matrix::from_vec(fm.row_keys.len(), width, data);
    Ok(fm)
}

/// Per-column statistics learned from training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl Standardizer {
    /// Fits on the design columns of `train_rows`.
    pub fn fit(fm: &FeatureMatrix, train_rows: &[usize]) -> Result<Self, FeatureError> {
        if train_rows.is_empty() {
            return Err(FeatureError::EmptyTrainSet);
        }
        if let Some(&bad) = train_rows.iter().find(|&&r| r >= fm.n_rows()) {
            return Err(FeatureError::RowOutOfRange(bad));
        }
        let cols = fm.n_columns();
        let n = train_rows.len() as f64;
        let mut mean = vec![0.0; cols];
        for &r in train_rows {
            for (m, v) in mean.iter_mut().zip(fm.design_row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for &r in train_rows {
            for ((s, v), m) in var.iter_mut().zip(fm.design_row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        let degenerate = std.iter().map(|&s| s < DEGENERATE_STD).collect();
        Ok(Self { mean, std, degenerate })
    }

    pub fn n_columns(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| if self.degenerate[j] { v - self.mean[j] } else { (v - self.mean[j]) / self.std[j] })
            .collect()
    }

    /// Standardized copy of `fm`: attention and confidence columns transformed alike.
    pub fn apply(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if fm.n_columns() != self.n_columns() {
            return Err(FeatureError::ColumnMismatch { expected: self.n_columns(), found: fm.n_columns() });
        }
        let width = fm.values.cols();
        let mut out = fm.clone();
        for i in 0..fm.n_rows() {
            let t = self.transform_row(&fm.design_row(i));
            out.values.row_mut(i).copy_from_slice(&t[..width]);
            if let Some(c) = out.confidence.as_mut() {
                c[i] = t[width];
            }
        }
        Ok(out)
    }
}
