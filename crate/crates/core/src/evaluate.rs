//! Task metric sets, top-N scoring and final test-set evaluation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{Dataset, TypedColumn};
use crate::metrics::{auc_roc, log_loss, mae, precision_recall_at_k, rmse, MetricValue, RankingScore};
use crate::models::TrainedModel;
use crate::pipeline::{histories, FittedPipeline, LogEntry, LogKind};
use crate::preprocess::{apply_plan, encode_labels, PreprocessError};
use crate::task::TaskKind;

/// Cutoffs reported for top-N tasks.
pub const TOPN_KS: [usize; 3] = [5, 10, 20];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("the test set has no rows")]
    EmptyInput,
    #[error("test set does not match the training schema: {0}")]
    SchemaMismatch(String),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::EmptyInput => "EmptyInput",
            EvalError::SchemaMismatch(_) => "SchemaMismatch",
        }
    }
}

impl From<PreprocessError> for EvalError {
    fn from(e: PreprocessError) -> Self {
        EvalError::SchemaMismatch(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSet {
    pub task: TaskKind,
    pub metrics: BTreeMap<String, MetricValue>,
    pub rows_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users_evaluated: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users_excluded: Option<usize>,
}

impl MetricSet {
    fn names(task: TaskKind) -> Vec<String> {
        match task {
            TaskKind::Ctr => vec!["auc_roc".into(), "log_loss".into()],
            TaskKind::Rating => vec!["mae".into(), "rmse".into()],
            TaskKind::TopN => TOPN_KS.iter().flat_map(|k| [format!("precision_at_{k}"), format!("recall_at_{k}")]).collect(),
        }
    }

    /// Every metric null with the same reason.
    pub fn all_null(task: TaskKind, reason: &str) -> Self {
        MetricSet {
            task,
            metrics: Self::names(task).into_iter().map(|n| (n, MetricValue::undefined(reason))).collect(),
            rows_evaluated: 0,
            users_evaluated: None,
            users_excluded: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).and_then(|m| m.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    /// (test row index, prediction)
    Scores(Vec<(usize, f64)>),
    /// (user, ranked (item, score) list)
    Rankings(Vec<(String, Vec<(String, f64)>)>),
}

impl Predictions {
    /// CSV with header `row_index,prediction` or `user_id,rank,item_id,score`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        match self {
            Predictions::Scores(rows) => {
                out.write_record(["row_index", "prediction"])?;
                for (r, p) in rows {
                    out.write_record([r.to_string(), p.to_string()])?;
                }
            }
            Predictions::Rankings(users) => {
                out.write_record(["user_id", "rank", "item_id", "score"])?;
                for (u, recs) in users {
                    for (rank, (item, s)) in recs.iter().enumerate() {
                        out.write_record([u.clone(), (rank + 1).to_string(), item.clone(), s.to_string()])?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestEvaluation {
    pub metrics: MetricSet,
    pub predictions: Predictions,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopNEval {
    pub scores: Vec<(usize, RankingScore)>,
    /// Evaluation users with no training interactions.
    pub users_without_history: usize,
}

/// precision/recall at each `k` for users appearing in `eval`. Relevant
/// items are a user's evaluation items minus their training history; users
/// without training history are skipped and counted.
pub fn topn_scores(model: &TrainedModel, train: &[(String, String)], eval: &[(String, String)], ks: &[usize]) -> TopNEval {
    let hist = histories(train);
    let mut relevant: BTreeMap<&str, HashSet<String>> = BTreeMap::new();
    for (u, i) in eval {
        relevant.entry(u.as_str()).or_default().insert(i.clone());
    }
    let max_k = ks.iter().copied().max().unwrap_or(1);
    let (mut recs, mut rels) = (Vec::new(), Vec::new());
    let mut without = 0;
    for (u, items) in relevant {
        let Some(h) = hist.get(u) else {
            without += 1;
            continue;
        };
        let r: Vec<String> = model.recommend(h, max_k).unwrap_or_default().into_iter().map(|(i, _)| i).collect();
        recs.push(r);
        rels.push(items.difference(h).cloned().collect::<HashSet<String>>());
    }
    let scores = ks
        .iter()
        .map(|&k| (k, precision_recall_at_k(&recs, &rels, k).expect("lengths match")))
        .collect();
    TopNEval { scores, users_without_history: without }
}

fn id(col: Option<&TypedColumn>, r: usize) -> Option<&str> {
    col.and_then(|c| c.cells[r].as_text())
}

fn null_or(value: Option<f64>, reason: &str) -> MetricValue {
    match value {
        Some(v) if v.is_finite() => MetricValue::of(v),
        _ => MetricValue::undefined(reason),
    }
}

/// Predicts every test row and, when labels are present, scores them.
pub fn evaluate_test(fitted: &FittedPipeline, test: &Dataset, top_k: usize) -> Result<TestEvaluation, EvalError> {
    let n = test.row_count();
    if n == 0 {
        return Err(EvalError::EmptyInput);
    }
    let task = fitted.task.kind;
    let mut log = Vec::new();
    let user_col = fitted.task.user_id.as_deref().and_then(|c| test.column(c));
    let item_col = fitted.task.item_id.as_deref().and_then(|c| test.column(c));

    if task == TaskKind::TopN {
        let pairs: Vec<(String, String)> = (0..n)
            .filter_map(|r| Some((id(user_col, r)?.to_string(), id(item_col, r)?.to_string())))
            .collect();
        if pairs.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        if pairs.len() < n {
            log.push(LogEntry::new(
                LogKind::ExcludedRows,
                "test",
                format!("{} test rows without both ids", n - pairs.len()),
            ));
        }
        let eval = topn_scores(&fitted.model, &fitted.history, &pairs, &TOPN_KS);
        let mut metrics = BTreeMap::new();
        let (mut evaluated, mut excluded) = (0, eval.users_without_history);
        for (k, s) in &eval.scores {
            let defined = s.users_evaluated > 0;
            let reason = "no test user with training history and unseen relevant items";
            metrics.insert(format!("precision_at_{k}"), null_or(defined.then_some(s.precision), reason));
            metrics.insert(format!("recall_at_{k}"), null_or(defined.then_some(s.recall), reason));
            evaluated = s.users_evaluated;
            excluded = eval.users_without_history + s.users_excluded;
        }
        if excluded > 0 {
            log.push(LogEntry::new(
                LogKind::ExcludedRows,
                "test users",
                format!("{excluded} test users without training history or unseen relevant items were not scored"),
            ));
        }
        let hist = histories(&fitted.history);
        let users: BTreeSet<&str> = pairs.iter().map(|(u, _)| u.as_str()).collect();
        let empty = HashSet::new();
        let rankings = users
            .into_iter()
            .map(|u| {
                let h = hist.get(u).unwrap_or(&empty);
                (u.to_string(), fitted.model.recommend(h, top_k).unwrap_or_default())
            })
            .collect();
        return Ok(TestEvaluation {
            metrics: MetricSet {
                task,
                metrics,
                rows_evaluated: pairs.len(),
                users_evaluated: Some(evaluated),
                users_excluded: Some(excluded),
            },
            predictions: Predictions::Rankings(rankings),
            log,
        });
    }

    let predictions: Vec<f64> = match task {
        TaskKind::Ctr => {
            let plan = fitted.plan.as_ref().ok_or_else(|| EvalError::SchemaMismatch("no preprocessing plan".into()))?;
            let x = apply_plan(plan, test)?;
            fitted.model.predict_proba(&x).unwrap_or_default()
        }
        _ => (0..n)
            .map(|r| fitted.model.predict_rating(id(user_col, r), id(item_col, r)).unwrap_or(f64::NAN))
            .collect(),
    };

    let labels = fitted
        .label_encoding
        .as_ref()
        .and_then(|(name, enc)| test.column(name).map(|col| (name, enc, col)))
        .map(|(name, enc, col)| {
            let all: Vec<usize> = (0..n).collect();
            encode_labels(name, enc, col, &all).ok()
        });
    let metrics = match labels.flatten() {
        None => MetricSet::all_null(task, "unlabeled test set"),
        Some(lv) => {
            let rows: Vec<usize> = (0..n).filter(|&r| !lv.missing[r]).collect();
            if rows.len() < n {
                log.push(
                    LogEntry::new(
                        LogKind::ExcludedRows,
                        "test",
                        format!("{} test rows with a missing label were predicted but not scored", n - rows.len()),
                    )
                    .with_rows((0..n).filter(|&r| lv.missing[r]).collect()),
                );
            }
            let y: Vec<f64> = rows.iter().map(|&r| lv.values[r]).collect();
            let p: Vec<f64> = rows.iter().map(|&r| predictions[r]).collect();
            let mut m = BTreeMap::new();
            if task == TaskKind::Ctr {
                m.insert("auc_roc".to_string(), null_or(auc_roc(&y, &p).ok().flatten(), "single class in test labels"));
                m.insert("log_loss".to_string(), null_or(log_loss(&y, &p).ok(), "no labeled rows"));
            } else {
                m.insert("rmse".to_string(), null_or(rmse(&y, &p).ok(), "no labeled rows"));
                m.insert("mae".to_string(), null_or(mae(&y, &p).ok(), "no labeled rows"));
            }
            MetricSet { task, metrics: m, rows_evaluated: rows.len(), users_evaluated: None, users_excluded: None }
        }
    };
    Ok(TestEvaluation {
        metrics,
        predictions: Predictions::Scores(predictions.into_iter().enumerate().collect()),
        log,
    })
}
