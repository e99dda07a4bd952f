//! Validation splits, hyperparameter search and winner selection.
//!
//! Trials are independent: trial `i` trains with seed `master + i`, and
//! results are collected in enumeration order, so the outcome does not
//! depend on how many threads ran them.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::models::{Assignment, ModelId, ModelSpec};
use crate::task::TaskKind;

pub const DEFAULT_K_FOLDS: usize = 5;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;
pub const DEFAULT_RANDOM_TRIALS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("need at least {need} rows to split, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("no model in the zoo is compatible with this task")]
    NoCompatibleModel,
    #[error("no trials to select from")]
    EmptyTrials,
    #[error("invalid split setting: {0}")]
    InvalidSplit(String),
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            SearchError::TooFewRows { .. } => "TooFewRows",
            SearchError::NoCompatibleModel => "NoCompatibleModel",
            SearchError::EmptyTrials => "EmptyTrials",
            SearchError::InvalidSplit(_) => "InvalidSplit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Temporal when a fully populated timestamp exists, k-fold otherwise.
    Auto,
    Kfold,
    Temporal,
}

impl FromStr for SplitPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(SplitPolicy::Auto),
            "kfold" => Ok(SplitPolicy::Kfold),
            "temporal" => Ok(SplitPolicy::Temporal),
            _ => Err(format!("unknown split policy `{s}` (expected auto, kfold or temporal)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    Kfold { k: usize },
    Temporal { holdout_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Train/validation folds over positions `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPlan {
    #[serde(flatten)]
    pub kind: SplitKind,
    pub n_rows: usize,
    #[serde(skip)]
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn fold_sizes(&self) -> Vec<(usize, usize)> {
        self.folds.iter().map(|f| (f.train.len(), f.validation.len())).collect()
    }
}

/// Seeded k-fold: shuffle `0..n`, then position `p` goes to fold `p % k`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<SplitPlan, SearchError> {
    if k < 2 {
        return Err(SearchError::InvalidSplit(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(SearchError::TooFewRows { need: k, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (p, &row) in order.iter().enumerate() {
        fold_of[row] = p % k;
    }
    let folds = (0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| fold_of[r] == f);
            Fold { train, validation }
        })
        .collect();
    Ok(SplitPlan { kind: SplitKind::Kfold { k }, n_rows: n, folds })
}

/// Sorts by (timestamp, position) and holds out the last
/// `round(fraction * n)` positions, at least one on each side.
pub fn temporal_split(timestamps: &[i64], fraction: f64) -> Result<SplitPlan, SearchError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SearchError::InvalidSplit(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let n = timestamps.len();
    if n < 2 {
        return Err(SearchError::TooFewRows { need: 2, got: n });
    }
    let h = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (timestamps[i], i));
    let mut validation = order.split_off(n - h);
    let mut train = order;
    train.sort_unstable();
    validation.sort_unstable();
    Ok(SplitPlan {
        kind: SplitKind::Temporal { holdout_fraction: fraction },
        n_rows: n,
        folds: vec![Fold { train, validation }],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSettings {
    pub policy: SplitPolicy,
    pub k: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings { policy: SplitPolicy::Auto, k: DEFAULT_K_FOLDS, holdout_fraction: DEFAULT_HOLDOUT_FRACTION, seed: 0 }
    }
}

/// Splits `n` positions. `timestamps` is `Some` only when every position
/// has one.
pub fn make_splits(n: usize, timestamps: Option<&[i64]>, settings: &SplitSettings) -> Result<SplitPlan, SearchError> {
    match (settings.policy, timestamps) {
        (SplitPolicy::Auto | SplitPolicy::Temporal, Some(ts)) => temporal_split(ts, settings.holdout_fraction),
        (SplitPolicy::Temporal, None) => {
            Err(SearchError::InvalidSplit("temporal split needs a fully populated timestamp column".into()))
        }
        _ => kfold_split(n, settings.k, settings.seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    Random { n_trials: usize },
}

/// One configuration to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub index: usize,
    pub model_id: ModelId,
    pub hyperparameters: Assignment,
    pub seed: u64,
}

/// Grid: each model's Cartesian product, models by ascending id. Random:
/// trial `i` draws a model and its values from a generator seeded with
/// `seed + i`.
pub fn enumerate_candidates(models: &[ModelSpec], strategy: Strategy, seed: u64) -> Result<Vec<Candidate>, SearchError> {
    if models.is_empty() {
        return Err(SearchError::NoCompatibleModel);
    }
    let mut sorted: Vec<&ModelSpec> = models.iter().collect();
    sorted.sort_by_key(|m| m.model_id.as_str());
    let pairs: Vec<(ModelId, Assignment)> = match strategy {
        Strategy::Grid => sorted.iter().flat_map(|m| m.grid().into_iter().map(|a| (m.model_id, a))).collect(),
        Strategy::Random { n_trials } => (0..n_trials)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                let m = sorted[rng.random_range(0..sorted.len())];
                let a = m.params.iter().map(|p| (p.name.to_string(), p.sample(rng.random::<f64>()))).collect();
                (m.model_id, Assignment(a))
            })
            .collect(),
    };
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(index, (model_id, hyperparameters))| Candidate {
            index,
            model_id,
            hyperparameters,
            seed: seed.wrapping_add(index as u64),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    AucRoc,
    Rmse,
    RecallAt10,
}

impl SelectionMetric {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Ctr => SelectionMetric::AucRoc,
            TaskKind::Rating => SelectionMetric::Rmse,
            TaskKind::TopN => SelectionMetric::RecallAt10,
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, SelectionMetric::Rmse)
    }

    pub fn worst(self) -> f64 {
        if self.higher_is_better() {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `Less` when `a` is better than `b`.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        if self.higher_is_better() {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMetric::AucRoc => "auc_roc",
            SelectionMetric::Rmse => "rmse",
            SelectionMetric::RecallAt10 => "recall_at_10",
        })
    }
}

/// Outcome of one fold of one trial.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldOutcome {
    Scored(f64),
    /// Metric undefined on this fold (e.g. single-class validation labels).
    Undefined(String),
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub index: usize,
    pub model_id: ModelId,
    pub hyperparameters: Assignment,
    pub seed: u64,
    pub fold_scores: Vec<Option<f64>>,
    /// Mean over folds with a defined score; worst possible when none is
    /// defined or the trial failed.
    pub mean_score: f64,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TrialResult {
    pub fn from_outcomes(c: &Candidate, outcomes: Vec<FoldOutcome>, metric: SelectionMetric) -> Self {
        let mut notes = Vec::new();
        let mut failed = false;
        let fold_scores: Vec<Option<f64>> = outcomes
            .into_iter()
            .enumerate()
            .map(|(f, o)| match o {
                FoldOutcome::Scored(s) => Some(s),
                FoldOutcome::Undefined(why) => {
                    notes.push(format!("fold {f}: {why}"));
                    None
                }
                FoldOutcome::Failed(why) => {
                    failed = true;
                    notes.push(format!("fold {f}: {why}"));
                    None
                }
            })
            .collect();
        let defined: Vec<f64> = fold_scores.iter().flatten().copied().collect();
        let mean_score = if failed || defined.is_empty() {
            metric.worst()
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        TrialResult {
            index: c.index,
            model_id: c.model_id,
            hyperparameters: c.hyperparameters.clone(),
            seed: c.seed,
            fold_scores,
            mean_score,
            status: if failed { TrialStatus::Failed } else { TrialStatus::Ok },
            notes,
        }
    }
}

/// Runs `score(candidate, fold)` for every candidate and fold on the
/// current rayon pool. Results come back in enumeration order.
pub fn run_search<F>(candidates: &[Candidate], n_folds: usize, metric: SelectionMetric, score: F) -> Vec<TrialResult>
where
    F: Fn(&Candidate, usize) -> FoldOutcome + Sync,
{
    let mut results: Vec<TrialResult> = candidates
        .par_iter()
        .map(|c| {
            let outcomes = (0..n_folds).map(|f| score(c, f)).collect();
            TrialResult::from_outcomes(c, outcomes, metric)
        })
        .collect();
    results.sort_by_key(|t| t.index);
    results
}

/// Best mean score; exact ties go to a successful trial, then the smaller
/// model id, then the earlier index.
pub fn select_best(trials: &[TrialResult], metric: SelectionMetric) -> Result<&TrialResult, SearchError> {
    trials
        .iter()
        .min_by(|a, b| {
            metric
                .compare(a.mean_score, b.mean_score)
                .then((a.status == TrialStatus::Failed).cmp(&(b.status == TrialStatus::Failed)))
                .then(a.model_id.as_str().cmp(b.model_id.as_str()))
                .then(a.index.cmp(&b.index))
        })
        .ok_or(SearchError::EmptyTrials)
}
