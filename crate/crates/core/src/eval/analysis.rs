//! Accuracy binned by a per-record quantity, and the two-model scaling grid.

use serde::Serialize;

use super::experiment::record_labels;
use super::EvalError;
use crate::features::attention_total;
use crate::trace::{TraceDataset, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinKey {
    Popularity,
    Constrainedness,
    /// Total attention contribution to the constraint tokens.
    AttentionTotal,
}

impl BinKey {
    pub fn as_str(self) -> &'static str {
        match self {
            BinKey::Popularity => "popularity",
            BinKey::Constrainedness => "constrainedness",
            BinKey::AttentionTotal => "attention_total",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "popularity" => Some(BinKey::Popularity),
            "constrainedness" => Some(BinKey::Constrainedness),
            "attention_total" | "attention" => Some(BinKey::AttentionTotal),
            _ => None,
        }
    }

    pub fn value(self, record: &TraceRecord) -> Result<f64, EvalError> {
        let missing = || EvalError::MissingKey { id: record.id.clone(), key: self.as_str() };
        match self {
            BinKey::Popularity => record.meta.popularity.map(|p| p as f64).ok_or_else(missing),
            BinKey::Constrainedness => record.meta.constrainedness.map(|c| c as f64).ok_or_else(missing),
            BinKey::AttentionTotal => Ok(attention_total(record)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AccuracyBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub accuracy: f64,
}

/// Splits the rows into `n_bins` equal-count bins after sorting by value
/// (ties in input order); earlier bins take the remainder.
pub fn bin_values(values: &[f64], correct: &[bool], n_bins: usize) -> Result<Vec<AccuracyBin>, EvalError> {
    if values.len() != correct.len() {
        return Err(EvalError::LengthMismatch { left: values.len(), right: correct.len() });
    }
    if values.is_empty() || n_bins == 0 {
        return Err(EvalError::Empty("binning needs rows and at least one bin".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let n = values.len();
    let bins = n_bins.min(n);
    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for b in 0..bins {
        let size = n / bins + usize::from(b < n % bins);
        let members = &order[start..start + size];
        out.push(AccuracyBin {
            lo: values[members[0]],
            hi: values[members[size - 1]],
            count: size,
            accuracy: members.iter().filter(|&&i| correct[i]).count() as f64 / size as f64,
        });
        start += size;
    }
    Ok(out)
}

pub fn bin_accuracy(ds: &TraceDataset, key: BinKey, n_bins: usize) -> Result<Vec<AccuracyBin>, EvalError> {
    let values = ds.records.iter().map(|r| key.value(r)).collect::<Result<Vec<_>, _>>()?;
    bin_values(&values, &record_labels(ds)?, n_bins)
}

/// Joint outcome of a smaller and a larger model on one query. The
/// declaration order breaks ties when picking a cell's modal outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Outcome {
    BothSucceed,
    OnlyLarger,
    OnlySmaller,
    BothFail,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::BothSucceed, Outcome::OnlyLarger, Outcome::OnlySmaller, Outcome::BothFail];

    pub fn of(small_ok: bool, large_ok: bool) -> Self {
        match (small_ok, large_ok) {
            (true, true) => Outcome::BothSucceed,
            (false, true) => Outcome::OnlyLarger,
            (true, false) => Outcome::OnlySmaller,
            (false, false) => Outcome::BothFail,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::BothSucceed => "both_succeed",
            Outcome::OnlyLarger => "only_larger",
            Outcome::OnlySmaller => "only_smaller",
            Outcome::BothFail => "both_fail",
        }
    }
}

/// Square grid over (small-model attention, large-model attention), each
/// axis normalized by its maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingGrid {
    pub n_cells: usize,
    /// Per-cell counts in `Outcome::ALL` order, indexed `[y * n_cells + x]`.
    pub counts: Vec<[usize; 4]>,
}

impl ScalingGrid {
    pub fn counts_at(&self, x: usize, y: usize) -> [usize; 4] {
        self.counts[y * self.n_cells + x]
    }

    /// Most frequent outcome in a cell, `None` for empty cells.
    pub fn modal(&self, x: usize, y: usize) -> Option<Outcome> {
        let c = self.counts_at(x, y);
        let best = *c.iter().max()?;
        if best == 0 {
            return None;
        }
        Outcome::ALL.iter().zip(c).find(|(_, n)| *n == best).map(|(o, _)| *o)
    }
}

fn cell(v: f64, max: f64, n: usize) -> usize {
    (((v / max) * n as f64).floor().max(0.0) as usize).min(n - 1)
}

pub fn scaling_grid(
    small_attention: &[f64],
    large_attention: &[f64],
    small_ok: &[bool],
    large_ok: &[bool],
    n_cells: usize,
) -> Result<ScalingGrid, EvalError> {
    let n = small_attention.len();
    for len in [large_attention.len(), small_ok.len(), large_ok.len()] {
        if len != n {
            return Err(EvalError::LengthMismatch { left: n, right: len });
        }
    }
    if n == 0 || n_cells == 0 {
        return Err(EvalError::Empty("scaling grid needs queries and cells".into()));
    }
    let max_x = small_attention.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_y = large_attention.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max_x > 0.0 && max_y > 0.0) {
        return Err(EvalError::Incompatible("attention totals must have a positive maximum".into()));
    }
    let mut counts = vec![[0usize; 4]; n_cells * n_cells];
    for i in 0..n {
        let (x, y) = (cell(small_attention[i], max_x, n_cells), cell(large_attention[i], max_y, n_cells));
        counts[y * n_cells + x][Outcome::of(small_ok[i], large_ok[i]) as usize] += 1;
    }
    Ok(ScalingGrid { n_cells, counts })
}

/// Grid for two trace datasets over the same queries, matched by record id.
pub fn scaling_grid_from(small: &TraceDataset, large: &TraceDataset, n_cells: usize) -> Result<ScalingGrid, EvalError> {
    let index: std::collections::HashMap<&str, &TraceRecord> =
        large.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let (mut xs, mut ys, mut so, mut lo) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in &small.records {
        let Some(other) = index.get(r.id.as_str()) else {
            log::warn!("record {} has no counterpart in the larger model's traces", r.id);
            continue;
        };
        xs.push(attention_total(r)?);
        ys.push(attention_total(other)?);
        so.push(r.all_satisfied().ok_or_else(|| EvalError::Unlabeled(r.id.clone()))?);
        lo.push(other.all_satisfied().ok_or_else(|| EvalError::Unlabeled(other.id.clone()))?);
    }
    scaling_grid(&xs, &ys, &so, &lo, n_cells)
}
