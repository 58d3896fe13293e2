//! Ranking metrics: AUROC, risk at the score extremes, Spearman correlation.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via the rank-sum statistic; ties count one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiskEnd {
    /// Highest-scored rows, the ones the predictor deems most reliable.
    Top,
    /// Lowest-scored rows.
    Bottom,
}

/// Error rate among the `⌈frac·n⌉` rows at one end of the score ranking.
///
/// Rows are sorted by descending score with ties kept in input order.
/// `labels` are true for factually correct rows.
pub fn risk_at(scores: &[f64], labels: &[bool], frac: f64, end: RiskEnd) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty("risk needs at least one row".into()));
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(EvalError::InvalidFraction(frac));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let k = ((frac * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let slice = match end {
        RiskEnd::Top => &order[..k],
        RiskEnd::Bottom => &order[n - k..],
    };
    Ok(slice.iter().filter(|&&i| !labels[i]).count() as f64 / k as f64)
}

/// Spearman rank correlation and its two-sided p-value from the
/// t-approximation with `n − 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(EvalError::Empty(format!("spearman needs at least 3 points, got {n}")));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y)).ok_or(EvalError::ConstantInput)?;
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok((rho.clamp(-1.0, 1.0), p))
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Mean and standard error (sample std over `√n`) of per-seed values.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
