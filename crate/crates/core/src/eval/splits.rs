//! Seeded train/test partitions of a trace dataset.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::trace::{TraceDataset, TraceRecord};

/// Which records must land on the same side of a split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Every record is its own group.
    ByRecord,
    /// Records asking for the same unordered set of constraints share a group,
    /// so a prompt and its permuted twin never straddle the split.
    #[default]
    ByConstraintSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub grouping: Grouping,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self { seed: 0, train_fraction: 0.5, grouping: Grouping::default() }
    }
}

/// Record indices on each side, both ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn train_ids<'a>(&self, ds: &'a TraceDataset) -> Vec<&'a str> {
        self.train.iter().map(|&i| ds.records[i].id.as_str()).collect()
    }

    pub fn test_ids<'a>(&self, ds: &'a TraceDataset) -> Vec<&'a str> {
        self.test.iter().map(|&i| ds.records[i].id.as_str()).collect()
    }
}

/// Grouping key: the sorted multiset of (verifier, constrained prompt text).
pub fn constraint_set_key(record: &TraceRecord) -> Vec<String> {
    let mut key: Vec<String> = record
        .constraints
        .iter()
        .map(|c| {
            let text = record.prompt_tokens.get(c.span()).map(|t| t.join(" ")).unwrap_or_default();
            format!("{:?}\u{1f}{}", c.verifier, text.trim().to_lowercase())
        })
        .collect();
    key.sort();
    key
}

fn groups(ds: &TraceDataset, grouping: Grouping) -> Vec<Vec<usize>> {
    match grouping {
        Grouping::ByRecord => (0..ds.len()).map(|i| vec![i]).collect(),
        Grouping::ByConstraintSet => {
            let mut index: HashMap<Vec<String>, usize> = HashMap::new();
            let mut out: Vec<Vec<usize>> = Vec::new();
            for (i, r) in ds.records.iter().enumerate() {
                let g = *index.entry(constraint_set_key(r)).or_insert_with(|| {
                    out.push(Vec::new());
                    out.len() - 1
                });
                out[g].push(i);
            }
            out
        }
    }
}

/// `n_seeds` independent splits. Split `s` depends only on `(plan.seed, s)`.
pub fn make_splits(ds: &TraceDataset, plan: &SplitPlan, n_seeds: usize) -> Result<Vec<Split>, EvalError> {
    if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) {
        return Err(EvalError::InvalidFraction(plan.train_fraction));
    }
    let groups = groups(ds, plan.grouping);
    let target = (plan.train_fraction * ds.len() as f64).round() as usize;
    (0..n_seeds)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(s as u64);
            let mut order: Vec<usize> = (0..groups.len()).collect();
            order.shuffle(&mut rng);
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for g in order {
                let members = &groups[g];
                // take the group if at least half of it fits under the target
                if 2 * train.len() + members.len() <= 2 * target {
                    train.extend_from_slice(members);
                } else {
                    test.extend_from_slice(members);
                }
            }
            if train.is_empty() || test.is_empty() {
                return Err(EvalError::EmptySide { seed: s });
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok(Split { train, test })
        })
        .collect()
}
