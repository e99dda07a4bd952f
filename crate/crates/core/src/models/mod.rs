//! The per-task model zoo and its hyperparameter spaces.
//!
//! | task   | models                     |
//! |--------|----------------------------|
//! | ctr    | `logreg`                   |
//! | rating | `global_mean`, `mf`        |
//! | top_n  | `item_knn`, `popularity`   |
//!
//! Every model trains single-threaded with a fixed, seeded visiting order,
//! so identical inputs and seed give bit-identical parameters.

mod logreg;
mod mf;
mod topn;

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::preprocess::FeatureMatrix;
use crate::task::{TaskKind, TaskSpec};

pub use logreg::{logreg_objective, train_logreg, LogRegModel, LogRegParams};
pub use mf::{mf_interaction_loss_and_grad, train_mf, GlobalMeanModel, MfGradient, MfModel, MfParams, Rating};
pub use topn::{train_item_knn, train_popularity, ItemKnnModel, ItemKnnParams, PopularityModel};

/// Fraction of training rows held out to drive early stopping.
pub const EARLY_STOP_FRACTION: f64 = 0.1;
/// Below this many rows no early-stopping holdout is taken.
pub const EARLY_STOP_MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    GlobalMean,
    ItemKnn,
    #[serde(rename = "logreg")]
    LogReg,
    Mf,
    Popularity,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [ModelId::GlobalMean, ModelId::ItemKnn, ModelId::LogReg, ModelId::Mf, ModelId::Popularity];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::GlobalMean => "global_mean",
            ModelId::ItemKnn => "item_knn",
            ModelId::LogReg => "logreg",
            ModelId::Mf => "mf",
            ModelId::Popularity => "popularity",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(i) => i as f64,
            ParamValue::Float(x) => x,
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            ParamValue::Int(i) => i.max(0) as usize,
            ParamValue::Float(x) => x.max(0.0).round() as usize,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
        }
    }
}

/// Hyperparameter values in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment(pub Vec<(String, ParamValue)>);

impl Assignment {
    pub fn get(&self, name: &str) -> Option<ParamValue> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn f64_or(&self, name: &str, default: f64) -> f64 {
        self.get(name).map_or(default, ParamValue::as_f64)
    }

    pub fn usize_or(&self, name: &str, default: usize) -> usize {
        self.get(name).map_or(default, ParamValue::as_usize)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(n, v)| format!("{n}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

/// One tunable hyperparameter: a grid for exhaustive search and a bounded
/// range for random search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: ParamValue,
    pub grid: Vec<ParamValue>,
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
    pub integer: bool,
}

impl ParamSpec {
    fn float(name: &'static str, default: f64, grid: &[f64], low: f64, high: f64, scale: Scale) -> Self {
        ParamSpec {
            name,
            default: ParamValue::Float(default),
            grid: grid.iter().map(|&v| ParamValue::Float(v)).collect(),
            low,
            high,
            scale,
            integer: false,
        }
    }

    fn int(name: &'static str, default: i64, grid: &[i64], low: f64, high: f64, scale: Scale) -> Self {
        ParamSpec {
            name,
            default: ParamValue::Int(default),
            grid: grid.iter().map(|&v| ParamValue::Int(v)).collect(),
            low,
            high,
            scale,
            integer: true,
        }
    }

    /// Maps `u ∈ [0, 1)` onto the range.
    pub fn sample(&self, u: f64) -> ParamValue {
        let x = match self.scale {
            Scale::Linear => self.low + u * (self.high - self.low),
            Scale::Log => (self.low.ln() + u * (self.high.ln() - self.low.ln())).exp(),
        };
        if self.integer {
            ParamValue::Int(x.round().clamp(self.low, self.high) as i64)
        } else {
            ParamValue::Float(x.clamp(self.low, self.high))
        }
    }

    pub fn contains(&self, v: ParamValue) -> bool {
        let x = v.as_f64();
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub model_id: ModelId,
    pub tasks: Vec<TaskKind>,
    pub params: Vec<ParamSpec>,
}

impl ModelSpec {
    pub fn defaults(&self) -> Assignment {
        Assignment(self.params.iter().map(|p| (p.name.to_string(), p.default)).collect())
    }

    /// Full Cartesian product of the grids; the first parameter varies
    /// slowest.
    pub fn grid(&self) -> Vec<Assignment> {
        let mut out = vec![Assignment::default()];
        for p in &self.params {
            out = out
                .into_iter()
                .flat_map(|a| {
                    p.grid.iter().map(move |v| {
                        let mut next = a.clone();
                        next.0.push((p.name.to_string(), *v));
                        next
                    })
                })
                .collect();
        }
        out
    }
}

pub fn model_spec(id: ModelId) -> ModelSpec {
    use Scale::*;
    let (tasks, params) = match id {
        ModelId::LogReg => (
            vec![TaskKind::Ctr],
            vec![
                ParamSpec::float("lr", 0.1, &[0.3, 0.1, 0.03], 0.01, 1.0, Log),
                ParamSpec::float("l2", 1e-4, &[0.0, 1e-4, 1e-2], 0.0, 1e-2, Linear),
            ],
        ),
        ModelId::Mf => (
            vec![TaskKind::Rating],
            vec![
                ParamSpec::int("rank", 8, &[4, 8, 16], 2.0, 32.0, Log),
                ParamSpec::float("lr", 0.01, &[0.05, 0.01], 0.005, 0.1, Log),
                ParamSpec::float("l2", 1e-2, &[1e-3, 1e-2], 1e-4, 1e-1, Log),
            ],
        ),
        ModelId::GlobalMean => (vec![TaskKind::Rating], vec![]),
        ModelId::Popularity => (vec![TaskKind::TopN], vec![]),
        ModelId::ItemKnn => (
            vec![TaskKind::TopN],
            vec![
                ParamSpec::int("k_neighbors", 50, &[10, 50, 100], 5.0, 200.0, Log),
                ParamSpec::float("shrinkage", 10.0, &[0.0, 10.0], 0.0, 100.0, Linear),
            ],
        ),
    };
    ModelSpec { model_id: id, tasks, params }
}

/// Models usable for `task`, by ascending model id, plus notes on any model
/// excluded because the schema lacks a column it needs.
pub fn compatible_models(task: &TaskSpec) -> (Vec<ModelSpec>, Vec<String>) {
    let mut notes = Vec::new();
    let mut out = Vec::new();
    for id in ModelId::ALL {
        let spec = model_spec(id);
        if !spec.tasks.contains(&task.kind) {
            continue;
        }
        if id == ModelId::Mf && (task.user_id.is_none() || task.item_id.is_none()) {
            notes.push("model `mf` skipped: rating task without both user_id and item_id".to_string());
            continue;
        }
        out.push(spec);
    }
    out.sort_by_key(|s| s.model_id.as_str());
    (out, notes)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("labels contain a single class; both 0 and 1 are required")]
    SingleClassLabels,
    #[error("loss became non-finite at epoch {epoch} (learning rate too high?)")]
    NonFiniteLoss { epoch: usize },
    #[error("no interactions to train on")]
    EmptyInteractions,
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("invalid training input: {0}")]
    InvalidInput(String),
}

impl TrainError {
    pub fn code(&self) -> &'static str {
        match self {
            TrainError::SingleClassLabels => "SingleClassLabels",
            TrainError::NonFiniteLoss { .. } => "NonFiniteLoss",
            TrainError::EmptyInteractions => "EmptyInteractions",
            TrainError::TooFewRows { .. } => "TooFewRows",
            TrainError::InvalidInput(_) => "InvalidInput",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub final_train_loss: Option<f64>,
    pub best_validation_loss: Option<f64>,
    pub validation_history: Vec<f64>,
    pub holdout_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    LogReg(LogRegModel),
    Mf(MfModel),
    GlobalMean(GlobalMeanModel),
    Popularity(PopularityModel),
    ItemKnn(ItemKnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    pub model_id: ModelId,
    pub hyperparameters: Assignment,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

impl TrainedModel {
    /// True when every fitted parameter is finite.
    pub fn is_finite(&self) -> bool {
        match &self.params {
            ModelParams::LogReg(m) => m.bias.is_finite() && m.weights.iter().all(|w| w.is_finite()),
            ModelParams::Mf(m) => m.all_finite(),
            ModelParams::GlobalMean(m) => m.mean.is_finite(),
            ModelParams::Popularity(_) => true,
            ModelParams::ItemKnn(m) => m.all_finite(),
        }
    }

    /// Click probabilities; `None` for non-ctr models.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Option<Vec<f64>> {
        match &self.params {
            ModelParams::LogReg(m) => Some(m.predict(x)),
            _ => None,
        }
    }

    /// Rating estimate; `None` for non-rating models.
    pub fn predict_rating(&self, user: Option<&str>, item: Option<&str>) -> Option<f64> {
        match &self.params {
            ModelParams::Mf(m) => Some(m.predict(user, item)),
            ModelParams::GlobalMean(m) => Some(m.mean),
            _ => None,
        }
    }

    /// Top `k` unseen items; `None` for non-top-N models.
    pub fn recommend(&self, history: &HashSet<String>, k: usize) -> Option<Vec<(String, f64)>> {
        match &self.params {
            ModelParams::Popularity(m) => Some(m.recommend(history, k)),
            ModelParams::ItemKnn(m) => Some(m.recommend(history, k)),
            _ => None,
        }
    }
}

/// Splits `0..n` into (fit, holdout) for early stopping. Holdout is the
/// latest rows by `order_key` when given, otherwise a seeded random subset.
/// Both halves come back sorted.
pub fn early_stop_split(n: usize, order_key: Option<&[i64]>, seed: u64) -> (Vec<usize>, Vec<usize>) {
    if n < EARLY_STOP_MIN_ROWS {
        return ((0..n).collect(), Vec::new());
    }
    let h = ((n as f64 * EARLY_STOP_FRACTION).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    let (mut fit, mut hold) = match order_key {
        Some(key) => {
            idx.sort_by_key(|&i| (key[i], i));
            let hold = idx.split_off(n - h);
            (idx, hold)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_e5a1);
            idx.shuffle(&mut rng);
            let fit = idx.split_off(h);
            (fit, idx)
        }
    };
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}
