//! L2-regularized logistic regression trained with mini-batch gradient
//! descent and early stopping on a holdout.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{early_stop_split, Assignment, ModelId, ModelParams, TrainError, TrainedModel, TrainingMeta};
use crate::metrics::PROB_CLIP;
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegParams {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams { lr: 0.1, l2: 1e-4, epochs: 100, batch_size: 32, patience: 5, min_delta: 1e-4, seed: 0 }
    }
}

impl LogRegParams {
    pub fn from_assignment(a: &Assignment, seed: u64) -> Self {
        let d = LogRegParams::default();
        LogRegParams { lr: a.f64_or("lr", d.lr), l2: a.f64_or("l2", d.l2), seed, ..d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LogRegModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Probability of the positive class, clamped away from 0 and 1.
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x)).clamp(PROB_CLIP, 1.0 - PROB_CLIP)
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_one(x.row(i))).collect()
    }
}

/// Mean log loss over `rows` plus `l2/2 * |w|^2` (the bias is not
/// penalized), with its gradient in `w` and `b`.
pub fn logreg_objective(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &[usize],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    let n = rows.len().max(1) as f64;
    for &i in rows {
        let xi = x.row(i);
        let z = dot(weights, xi) + bias;
        loss += softplus(z) - y[i] * z;
        let r = sigmoid(z) - y[i];
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * dot(weights, weights);
    (loss, gw, gb)
}

fn mean_log_loss(x: &FeatureMatrix, y: &[f64], rows: &[usize], m: &LogRegModel) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&i| {
            let z = m.logit(x.row(i));
            softplus(z) - y[i] * z
        })
        .sum();
    total / rows.len().max(1) as f64
}

/// Trains on every row of `x`. `order_key`, when given, selects the latest
/// rows as the early-stopping holdout; otherwise the holdout is random.
pub fn train_logreg(
    x: &FeatureMatrix,
    y: &[f64],
    order_key: Option<&[i64]>,
    hp: &LogRegParams,
    hyperparameters: Assignment,
) -> Result<TrainedModel, TrainError> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(TrainError::InvalidInput(format!("{} labels for {} rows", y.len(), n)));
    }
    if n == 0 {
        return Err(TrainError::TooFewRows { need: 2, got: 0 });
    }
    let has_class = |c: bool| y.iter().any(|&v| (v >= 0.5) == c);
    if !has_class(true) || !has_class(false) {
        return Err(TrainError::SingleClassLabels);
    }
    let (mut fit, mut hold) = early_stop_split(n, order_key, hp.seed);
    let fit_has = |c: bool| fit.iter().any(|&i| (y[i] >= 0.5) == c);
    if !fit_has(true) || !fit_has(false) {
        fit = (0..n).collect();
        hold.clear();
    }

    let mut model = LogRegModel { weights: vec![0.0; x.n_cols()], bias: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order = fit.clone();
    let batch = hp.batch_size.max(1);
    let mut meta = TrainingMeta { holdout_rows: hold.len(), ..TrainingMeta::default() };
    let mut best: Option<(f64, LogRegModel, usize)> = None;
    let mut wait = 0;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let (_, gw, gb) = logreg_objective(x, y, chunk, &model.weights, model.bias, hp.l2);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= hp.lr * g;
            }
            model.bias -= hp.lr * gb;
        }
        meta.epochs_run = epoch;
        let train_loss = logreg_objective(x, y, &fit, &model.weights, model.bias, hp.l2).0;
        if !train_loss.is_finite() || !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        meta.final_train_loss = Some(train_loss);
        if hold.is_empty() {
            continue;
        }
        let val = mean_log_loss(x, y, &hold, &model);
        if !val.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        meta.validation_history.push(val);
        match &best {
            Some((b, _, _)) if val >= b - hp.min_delta => {
                wait += 1;
                if wait >= hp.patience {
                    break;
                }
            }
            _ => {
                best = Some((val, model.clone(), epoch));
                wait = 0;
            }
        }
    }
    match best {
        Some((val, kept, epoch)) => {
            model = kept;
            meta.best_epoch = Some(epoch);
            meta.best_validation_loss = Some(val);
        }
        None => meta.best_epoch = Some(meta.epochs_run),
    }
    Ok(TrainedModel { model_id: ModelId::LogReg, hyperparameters, params: ModelParams::LogReg(model), meta })
}
