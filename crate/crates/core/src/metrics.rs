//! Task metrics.
//!
//! The corner cases are fixed so results are reproducible across
//! implementations: tied scores earn half credit in AUC, probabilities are
//! clipped to `[1e-15, 1 - 1e-15]` before the log, and precision@k divides by
//! `min(k, |recommended|)`.

use std::collections::HashSet;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

pub const PROB_CLIP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no values to evaluate")]
    EmptyInput,
}

/// A metric value, or `null` with the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl MetricValue {
    pub fn of(v: f64) -> Self {
        MetricValue { value: Some(v), reason: None }
    }

    pub fn undefined(reason: impl Into<String>) -> Self {
        MetricValue { value: None, reason: Some(reason.into()) }
    }
}

fn check_len(a: usize, b: usize) -> Result<(), MetricError> {
    if a != b {
        Err(MetricError::LengthMismatch(a, b))
    } else {
        Ok(())
    }
}

fn is_positive(y: f64) -> bool {
    y >= 0.5
}

/// Area under the ROC curve via the rank-sum (Mann-Whitney) statistic with
/// average ranks for ties. `None` when only one class is present.
pub fn auc_roc(labels: &[f64], scores: &[f64]) -> Result<Option<f64>, MetricError> {
    check_len(labels.len(), scores.len())?;
    let n_pos = labels.iter().filter(|&&y| is_positive(y)).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| is_positive(labels[k])).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok(Some((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n)))
}

/// Mean binary cross-entropy.
pub fn log_loss(labels: &[f64], probabilities: &[f64]) -> Result<f64, MetricError> {
    check_len(labels.len(), probabilities.len())?;
    if labels.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let total: f64 = labels
        .iter()
        .zip(probabilities)
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn rmse(labels: &[f64], predictions: &[f64]) -> Result<f64, MetricError> {
    check_len(labels.len(), predictions.len())?;
    if labels.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let sq: f64 = labels.iter().zip(predictions).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sq / labels.len() as f64).sqrt())
}

pub fn mae(labels: &[f64], predictions: &[f64]) -> Result<f64, MetricError> {
    check_len(labels.len(), predictions.len())?;
    if labels.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let abs: f64 = labels.iter().zip(predictions).map(|(y, p)| (y - p).abs()).sum();
    Ok(abs / labels.len() as f64)
}

/// Averaged top-k scores over users with a nonempty relevant set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingScore {
    pub precision: f64,
    pub recall: f64,
    pub users_evaluated: usize,
    /// Users skipped because their relevant set was empty.
    pub users_excluded: usize,
}

/// precision@k and recall@k for per-user ranked lists.
///
/// `recommended[u]` and `relevant[u]` describe the same user. Users whose
/// relevant set is empty are skipped and counted. With no evaluable user
/// both values are 0.
pub fn precision_recall_at_k<T: Eq + Hash>(
    recommended: &[Vec<T>],
    relevant: &[HashSet<T>],
    k: usize,
) -> Result<RankingScore, MetricError> {
    check_len(relevant.len(), recommended.len())?;
    let k = k.max(1);
    let (mut p_sum, mut r_sum, mut evaluated, mut excluded) = (0.0, 0.0, 0usize, 0usize);
    for (recs, rel) in recommended.iter().zip(relevant) {
        if rel.is_empty() {
            excluded += 1;
            continue;
        }
        evaluated += 1;
        let top = &recs[..recs.len().min(k)];
        let hits = top.iter().filter(|i| rel.contains(i)).count() as f64;
        if !top.is_empty() {
            p_sum += hits / top.len() as f64;
        }
        r_sum += hits / rel.len() as f64;
    }
    let denom = evaluated.max(1) as f64;
    Ok(RankingScore {
        precision: p_sum / denom,
        recall: r_sum / denom,
        users_evaluated: evaluated,
        users_excluded: excluded,
    })
}

pub fn precision_at_k<T: Eq + Hash>(recommended: &[Vec<T>], relevant: &[HashSet<T>], k: usize) -> Result<f64, MetricError> {
    precision_recall_at_k(recommended, relevant, k).map(|s| s.precision)
}

pub fn recall_at_k<T: Eq + Hash>(recommended: &[Vec<T>], relevant: &[HashSet<T>], k: usize) -> Result<f64, MetricError> {
    precision_recall_at_k(recommended, relevant, k).map(|s| s.recall)
}
