//! Rating predictors: the global-mean baseline and biased matrix
//! factorization trained with SGD.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{early_stop_split, Assignment, ModelId, ModelParams, TrainError, TrainedModel, TrainingMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct Rating {
    pub user: String,
    pub item: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalMeanModel {
    pub mean: f64,
}

impl GlobalMeanModel {
    pub fn fit(values: &[f64]) -> Result<TrainedModel, TrainError> {
        if values.is_empty() {
            return Err(TrainError::TooFewRows { need: 1, got: 0 });
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(TrainedModel {
            model_id: ModelId::GlobalMean,
            hyperparameters: Assignment::default(),
            params: ModelParams::GlobalMean(GlobalMeanModel { mean }),
            meta: TrainingMeta::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub rank: usize,
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Early stopping is not considered before this many epochs: with
    /// near-zero initial factors the loss plateaus on the bias terms first.
    pub min_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for MfParams {
    fn default() -> Self {
        MfParams { rank: 8, lr: 0.01, l2: 1e-2, epochs: 200, min_epochs: 25, patience: 10, min_delta: 1e-5, seed: 0 }
    }
}

impl MfParams {
    pub fn from_assignment(a: &Assignment, seed: u64) -> Self {
        let d = MfParams::default();
        MfParams {
            rank: a.usize_or("rank", d.rank).max(1),
            lr: a.f64_or("lr", d.lr),
            l2: a.f64_or("l2", d.l2),
            seed,
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfModel {
    pub global_mean: f64,
    pub rating_min: f64,
    pub rating_max: f64,
    pub user_index: BTreeMap<String, usize>,
    pub item_index: BTreeMap<String, usize>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_factors: Vec<Vec<f64>>,
    pub item_factors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl MfModel {
    fn raw(&self, u: Option<usize>, i: Option<usize>) -> f64 {
        let mut r = self.global_mean;
        if let Some(u) = u {
            r += self.user_bias[u];
        }
        if let Some(i) = i {
            r += self.item_bias[i];
        }
        if let (Some(u), Some(i)) = (u, i) {
            r += dot(&self.user_factors[u], &self.item_factors[i]);
        }
        r
    }

    /// Predicted rating, clipped to the training range. Unknown users or
    /// items fall back to the mean plus whichever bias is known.
    pub fn predict(&self, user: Option<&str>, item: Option<&str>) -> f64 {
        let u = user.and_then(|u| self.user_index.get(u).copied());
        let i = item.and_then(|i| self.item_index.get(i).copied());
        self.raw(u, i).clamp(self.rating_min, self.rating_max)
    }

    pub(crate) fn all_finite(&self) -> bool {
        let flat = |v: &Vec<Vec<f64>>| v.iter().flatten().all(|x| x.is_finite());
        self.global_mean.is_finite()
            && self.user_bias.iter().chain(&self.item_bias).all(|x| x.is_finite())
            && flat(&self.user_factors)
            && flat(&self.item_factors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfGradient {
    pub loss: f64,
    pub d_user_bias: f64,
    pub d_item_bias: f64,
    pub d_user_factors: Vec<f64>,
    pub d_item_factors: Vec<f64>,
}

/// Loss `1/2 (r - r_hat)^2 + l2/2 (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)` for a
/// single interaction, with its gradient. `r_hat = mu + b_u + b_i + p_u.q_i`.
pub fn mf_interaction_loss_and_grad(r: f64, mu: f64, bu: f64, bi: f64, pu: &[f64], qi: &[f64], l2: f64) -> MfGradient {
    let e = r - (mu + bu + bi + dot(pu, qi));
    let reg = bu * bu + bi * bi + dot(pu, pu) + dot(qi, qi);
    MfGradient {
        loss: 0.5 * e * e + 0.5 * l2 * reg,
        d_user_bias: -e + l2 * bu,
        d_item_bias: -e + l2 * bi,
        d_user_factors: pu.iter().zip(qi).map(|(p, q)| -e * q + l2 * p).collect(),
        d_item_factors: pu.iter().zip(qi).map(|(p, q)| -e * p + l2 * q).collect(),
    }
}

fn index_of<'a>(names: impl Iterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut sorted: Vec<&str> = names.collect();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.into_iter().enumerate().map(|(i, s)| (s.to_string(), i)).collect()
}

fn rmse_on(model: &MfModel, data: &[(usize, usize, f64)], rows: &[usize]) -> f64 {
    let sq: f64 = rows
        .iter()
        .map(|&k| {
            let (u, i, r) = data[k];
            let p = model.raw(Some(u), Some(i)).clamp(model.rating_min, model.rating_max);
            (r - p) * (r - p)
        })
        .sum();
    (sq / rows.len().max(1) as f64).sqrt()
}

/// Fits biased MF. The mean is fixed at the fit-split mean; factors start
/// uniform in (-0.01, 0.01).
pub fn train_mf(
    ratings: &[Rating],
    order_key: Option<&[i64]>,
    hp: &MfParams,
    hyperparameters: Assignment,
) -> Result<TrainedModel, TrainError> {
    if ratings.is_empty() {
        return Err(TrainError::EmptyInteractions);
    }
    if ratings.iter().any(|r| !r.value.is_finite()) {
        return Err(TrainError::InvalidInput("non-finite rating".into()));
    }
    let user_index = index_of(ratings.iter().map(|r| r.user.as_str()));
    let item_index = index_of(ratings.iter().map(|r| r.item.as_str()));
    let data: Vec<(usize, usize, f64)> =
        ratings.iter().map(|r| (user_index[&r.user], item_index[&r.item], r.value)).collect();

    let (fit, hold) = early_stop_split(data.len(), order_key, hp.seed);
    let fit_values = fit.iter().map(|&k| data[k].2);
    let global_mean = fit_values.clone().sum::<f64>() / fit.len() as f64;
    let (rating_min, rating_max) =
        data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, _, r)| (lo.min(r), hi.max(r)));

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let rank = hp.rank.max(1);
    let mut init = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..rank).map(|_| rng.random_range(-0.01..0.01)).collect()).collect()
    };
    let user_factors = init(user_index.len());
    let item_factors = init(item_index.len());
    let mut model = MfModel {
        global_mean,
        rating_min,
        rating_max,
        user_bias: vec![0.0; user_index.len()],
        item_bias: vec![0.0; item_index.len()],
        user_index,
        item_index,
        user_factors,
        item_factors,
    };

    let mut meta = TrainingMeta { holdout_rows: hold.len(), ..TrainingMeta::default() };
    let mut order = fit.clone();
    let mut best: Option<(f64, MfModel, usize)> = None;
    let mut wait = 0;
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let (u, i, r) = data[k];
            let g = mf_interaction_loss_and_grad(
                r,
                global_mean,
                model.user_bias[u],
                model.item_bias[i],
                &model.user_factors[u],
                &model.item_factors[i],
                hp.l2,
            );
            model.user_bias[u] -= hp.lr * g.d_user_bias;
            model.item_bias[i] -= hp.lr * g.d_item_bias;
            for (p, d) in model.user_factors[u].iter_mut().zip(&g.d_user_factors) {
                *p -= hp.lr * d;
            }
            for (q, d) in model.item_factors[i].iter_mut().zip(&g.d_item_factors) {
                *q -= hp.lr * d;
            }
        }
        meta.epochs_run = epoch;
        if !model.all_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        meta.final_train_loss = Some(rmse_on(&model, &data, &fit));
        if hold.is_empty() {
            continue;
        }
        let val = rmse_on(&model, &data, &hold);
        meta.validation_history.push(val);
        match &best {
            Some((b, _, _)) if val >= b - hp.min_delta => {
                wait += 1;
                if wait >= hp.patience && epoch >= hp.min_epochs {
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
    Ok(TrainedModel { model_id: ModelId::Mf, hyperparameters, params: ModelParams::Mf(model), meta })
}
