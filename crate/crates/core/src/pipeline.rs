//! End-to-end run: usable rows → splits → search → selection → final fit
//! → optional test evaluation. No file I/O happens here.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::autotune::{
    enumerate_candidates, make_splits, run_search, select_best, Candidate, FoldOutcome, SearchError, SelectionMetric,
    SplitPlan, SplitSettings, Strategy, TrialResult, TrialStatus,
};
use crate::evaluate::{evaluate_test, topn_scores, EvalError, TestEvaluation};
use crate::ingest::{Dataset, TypedColumn};
use crate::metrics::{auc_roc, rmse};
use crate::models::{
    compatible_models, train_item_knn, train_logreg, train_mf, train_popularity, Assignment, GlobalMeanModel,
    ItemKnnParams, LogRegParams, MfParams, ModelId, Rating, TrainError, TrainedModel,
};
use crate::preprocess::{
    apply_plan_rows, dedup_rows, encode_labels, fit_plan_rows, ColumnPlan, FeatureDecision, FeatureMatrix,
    LabelEncoding, PreprocessError, PreprocessOptions, PreprocessPlan, RankMap,
};
use crate::dsdl::FeatureType;
use crate::task::{TaskKind, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub strategy: Strategy,
    pub split: SplitSettings,
    pub preprocess: PreprocessOptions,
    pub top_k: usize,
    /// Worker threads for trials; 0 uses every core.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            strategy: Strategy::Grid,
            split: SplitSettings::default(),
            preprocess: PreprocessOptions::default(),
            top_k: 10,
            threads: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("final training of `{model}` failed: {source}")]
    FinalTraining { model: ModelId, source: TrainError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no usable rows left after exclusions")]
    NoUsableRows,
    #[error("could not start worker threads: {0}")]
    ThreadPool(String),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Preprocess(e) => e.code(),
            PipelineError::Search(e) => e.code(),
            PipelineError::FinalTraining { source, .. } => source.code(),
            PipelineError::Eval(e) => e.code(),
            PipelineError::NoUsableRows => "NoUsableRows",
            PipelineError::ThreadPool(_) => "ThreadPool",
        }
    }

    /// True for failures caused by the environment rather than the input.
    pub fn is_internal(&self) -> bool {
        matches!(self, PipelineError::ThreadPool(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    DroppedColumn,
    IgnoredColumn,
    UnusedColumns,
    ImputedColumn,
    ClippedColumn,
    ExcludedRows,
    SkippedModel,
    FailedTrial,
    SplitChoice,
    Warning,
}

/// One audit-trail entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub kind: LogKind,
    pub subject: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<usize>,
}

impl LogEntry {
    pub fn new(kind: LogKind, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        LogEntry { kind, subject: subject.into(), detail: detail.into(), rows: Vec::new() }
    }

    pub fn with_rows(mut self, rows: Vec<usize>) -> Self {
        self.rows = rows;
        self
    }
}

/// Per-row task inputs for the rows that take part in training.
#[derive(Debug, Clone)]
pub struct TaskData {
    /// Dataset row indices, ascending.
    pub rows: Vec<usize>,
    /// Encoded label per entry of `rows`.
    pub labels: Option<Vec<f64>>,
    pub label_encoding: Option<(String, LabelEncoding)>,
    pub users: Vec<Option<String>>,
    pub items: Vec<Option<String>>,
    /// Present only when every usable row has a timestamp.
    pub timestamps: Option<Vec<i64>>,
}

fn text_of(col: Option<&TypedColumn>, r: usize) -> Option<String> {
    col.and_then(|c| c.cells[r].as_text()).map(str::to_string)
}

fn label_encoding_for(data: &Dataset, name: &str, ty: FeatureType, rows: &[usize]) -> Result<LabelEncoding, PreprocessError> {
    Ok(match ty {
        FeatureType::Binary => LabelEncoding::Binary,
        FeatureType::Ordinal => {
            let col = data.column(name).ok_or(PreprocessError::SchemaMismatch)?;
            LabelEncoding::Ordinal { ranks: RankMap::infer(rows.iter().filter_map(|&r| col.cells[r].as_text())) }
        }
        _ => LabelEncoding::Numeric,
    })
}

/// Picks usable rows and extracts labels, ids and timestamps, logging every
/// exclusion.
pub fn prepare_task_data(
    data: &Dataset,
    task: &TaskSpec,
    options: &PreprocessOptions,
    log: &mut Vec<LogEntry>,
) -> Result<TaskData, PipelineError> {
    let all: Vec<usize> = (0..data.row_count()).collect();
    let mut rows = all.clone();

    let mut label_encoding = None;
    let mut label_values = None;
    if let (Some(name), Some(ty)) = (&task.label, task.label_type) {
        let enc = label_encoding_for(data, name, ty, &all)?;
        let col = data.column(name).ok_or(PreprocessError::SchemaMismatch)?;
        let lv = encode_labels(name, &enc, col, &all)?;
        let missing: Vec<usize> = all.iter().copied().filter(|&r| lv.missing[r]).collect();
        if !missing.is_empty() {
            log.push(
                LogEntry::new(LogKind::ExcludedRows, name.clone(), format!("{} rows with a missing label", missing.len()))
                    .with_rows(missing),
            );
            rows.retain(|&r| !lv.missing[r]);
        }
        label_values = Some(lv.values);
        label_encoding = Some((name.clone(), enc));
    }

    let user_col = task.user_id.as_deref().and_then(|n| data.column(n));
    let item_col = task.item_id.as_deref().and_then(|n| data.column(n));
    if task.kind == TaskKind::TopN {
        let (keep, drop): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| text_of(user_col, r).is_some() && text_of(item_col, r).is_some());
        if !drop.is_empty() {
            log.push(
                LogEntry::new(LogKind::ExcludedRows, "user_id/item_id", format!("{} rows without both ids", drop.len()))
                    .with_rows(drop),
            );
        }
        rows = keep;
    }

    if options.dedup_rows {
        let (kept, removed) = dedup_rows(data, &rows);
        if !removed.is_empty() {
            log.push(
                LogEntry::new(LogKind::ExcludedRows, "duplicates", format!("{} exact duplicate rows", removed.len()))
                    .with_rows(removed),
            );
        }
        rows = kept;
    }
    if rows.is_empty() {
        return Err(PipelineError::NoUsableRows);
    }

    let timestamps = match task.timestamp.as_deref().and_then(|n| data.column(n)) {
        Some(col) => {
            let ts: Vec<Option<i64>> = rows.iter().map(|&r| col.cells[r].as_time()).collect();
            if ts.iter().all(Option::is_some) {
                Some(ts.into_iter().flatten().collect())
            } else {
                log.push(LogEntry::new(
                    LogKind::Warning,
                    col.name.clone(),
                    "timestamp has missing cells; not used for temporal splits or early-stopping order",
                ));
                None
            }
        }
        None => None,
    };

    match task.kind {
        TaskKind::Ctr => {}
        TaskKind::Rating => log.push(LogEntry::new(
            LogKind::UnusedColumns,
            "features",
            "rating models learn from user_id, item_id and the label only; feature columns are summarized but unused",
        )),
        TaskKind::TopN => {
            log.push(LogEntry::new(
                LogKind::UnusedColumns,
                "features",
                "top_n models learn from (user_id, item_id) interactions only; feature columns are summarized but unused",
            ));
            if data.schema().has_label_section() {
                log.push(LogEntry::new(
                    LogKind::UnusedColumns,
                    "labels",
                    "every row counts as an interaction for top_n; label values are ignored",
                ));
            }
        }
    }

    Ok(TaskData {
        labels: label_values.map(|v| rows.iter().map(|&r| v[r]).collect()),
        users: rows.iter().map(|&r| text_of(user_col, r)).collect(),
        items: rows.iter().map(|&r| text_of(item_col, r)).collect(),
        timestamps,
        label_encoding,
        rows,
    })
}

/// Training inputs built from a subset of [`TaskData`] positions.
pub enum TrainInput {
    Ctr { x: FeatureMatrix, y: Vec<f64>, order: Option<Vec<i64>> },
    Rating { ratings: Vec<Rating>, values: Vec<f64>, order: Option<Vec<i64>> },
    TopN { pairs: Vec<(String, String)> },
}

impl TaskData {
    fn order_of(&self, positions: &[usize]) -> Option<Vec<i64>> {
        self.timestamps.as_ref().map(|ts| positions.iter().map(|&p| ts[p]).collect())
    }

    pub fn pairs(&self, positions: &[usize]) -> Vec<(String, String)> {
        positions
            .iter()
            .filter_map(|&p| Some((self.users[p].clone()?, self.items[p].clone()?)))
            .collect()
    }

    fn rating_input(&self, positions: &[usize]) -> TrainInput {
        let labels = self.labels.as_ref().expect("rating task has labels");
        let with_ids: Vec<usize> =
            positions.iter().copied().filter(|&p| self.users[p].is_some() && self.items[p].is_some()).collect();
        TrainInput::Rating {
            ratings: with_ids
                .iter()
                .map(|&p| Rating {
                    user: self.users[p].clone().unwrap_or_default(),
                    item: self.items[p].clone().unwrap_or_default(),
                    value: labels[p],
                })
                .collect(),
            values: positions.iter().map(|&p| labels[p]).collect(),
            order: self.order_of(&with_ids),
        }
    }
}

pub fn train_candidate(model_id: ModelId, hp: &Assignment, seed: u64, input: &TrainInput) -> Result<TrainedModel, TrainError> {
    let mismatch = || TrainError::InvalidInput(format!("model `{model_id}` does not fit this task's data"));
    match (model_id, input) {
        (ModelId::LogReg, TrainInput::Ctr { x, y, order }) => {
            train_logreg(x, y, order.as_deref(), &LogRegParams::from_assignment(hp, seed), hp.clone())
        }
        (ModelId::Mf, TrainInput::Rating { ratings, order, .. }) => {
            train_mf(ratings, order.as_deref(), &MfParams::from_assignment(hp, seed), hp.clone())
        }
        (ModelId::GlobalMean, TrainInput::Rating { values, .. }) => GlobalMeanModel::fit(values),
        (ModelId::Popularity, TrainInput::TopN { pairs }) => train_popularity(pairs),
        (ModelId::ItemKnn, TrainInput::TopN { pairs }) => {
            train_item_knn(pairs, &ItemKnnParams::from_assignment(hp), hp.clone())
        }
        _ => Err(mismatch()),
    }
}

/// Everything fitted on one fold's training part, plus what is needed to
/// score on its validation part.
enum FoldData {
    Ctr { train: TrainInput, x_val: FeatureMatrix, y_val: Vec<f64> },
    Rating { train: TrainInput, val: Vec<(Option<String>, Option<String>, f64)> },
    TopN { train: TrainInput, history: Vec<(String, String)>, val: Vec<(String, String)> },
    Unusable(String),
}

fn ctr_input(
    data: &Dataset,
    td: &TaskData,
    task: &TaskSpec,
    positions: &[usize],
    options: &PreprocessOptions,
) -> Result<(PreprocessPlan, TrainInput), PreprocessError> {
    let rows: Vec<usize> = positions.iter().map(|&p| td.rows[p]).collect();
    let plan = fit_plan_rows(data, &rows, task, options)?;
    let x = apply_plan_rows(&plan, data, &rows)?;
    let labels = td.labels.as_ref().expect("ctr task has labels");
    let y = positions.iter().map(|&p| labels[p]).collect();
    Ok((plan, TrainInput::Ctr { x, y, order: td.order_of(positions) }))
}

fn build_fold(
    data: &Dataset,
    td: &TaskData,
    task: &TaskSpec,
    train: &[usize],
    val: &[usize],
    options: &PreprocessOptions,
) -> FoldData {
    match task.kind {
        TaskKind::Ctr => {
            let (plan, input) = match ctr_input(data, td, task, train, options) {
                Ok(v) => v,
                Err(e) => return FoldData::Unusable(format!("preprocessing failed: {e}")),
            };
            let val_rows: Vec<usize> = val.iter().map(|&p| td.rows[p]).collect();
            match apply_plan_rows(&plan, data, &val_rows) {
                Ok(x_val) => {
                    let labels = td.labels.as_ref().expect("ctr task has labels");
                    FoldData::Ctr { train: input, x_val, y_val: val.iter().map(|&p| labels[p]).collect() }
                }
                Err(e) => FoldData::Unusable(format!("preprocessing failed: {e}")),
            }
        }
        TaskKind::Rating => {
            let labels = td.labels.as_ref().expect("rating task has labels");
            FoldData::Rating {
                train: td.rating_input(train),
                val: val.iter().map(|&p| (td.users[p].clone(), td.items[p].clone(), labels[p])).collect(),
            }
        }
        TaskKind::TopN => {
            let history = td.pairs(train);
            FoldData::TopN { train: TrainInput::TopN { pairs: history.clone() }, history, val: td.pairs(val) }
        }
    }
}

fn score_fold(c: &Candidate, fold: &FoldData) -> FoldOutcome {
    let train = match fold {
        FoldData::Unusable(why) => return FoldOutcome::Failed(why.clone()),
        FoldData::Ctr { train, .. } | FoldData::Rating { train, .. } | FoldData::TopN { train, .. } => train,
    };
    let model = match train_candidate(c.model_id, &c.hyperparameters, c.seed, train) {
        Ok(m) => m,
        Err(e) => return FoldOutcome::Failed(format!("{}: {e}", e.code())),
    };
    match fold {
        FoldData::Ctr { x_val, y_val, .. } => {
            let p = model.predict_proba(x_val).unwrap_or_default();
            match auc_roc(y_val, &p) {
                Ok(Some(v)) => FoldOutcome::Scored(v),
                Ok(None) => FoldOutcome::Undefined("validation labels contain a single class".into()),
                Err(e) => FoldOutcome::Failed(e.to_string()),
            }
        }
        FoldData::Rating { val, .. } => {
            let (y, p): (Vec<f64>, Vec<f64>) = val
                .iter()
                .map(|(u, i, r)| (*r, model.predict_rating(u.as_deref(), i.as_deref()).unwrap_or(f64::NAN)))
                .unzip();
            match rmse(&y, &p) {
                Ok(v) if v.is_finite() => FoldOutcome::Scored(v),
                Ok(_) => FoldOutcome::Failed("non-finite predictions".into()),
                Err(e) => FoldOutcome::Undefined(e.to_string()),
            }
        }
        FoldData::TopN { history, val, .. } => {
            let eval = topn_scores(&model, history, val, &[10]);
            match eval.scores.first() {
                Some((_, s)) if s.users_evaluated > 0 => FoldOutcome::Scored(s.recall),
                _ => FoldOutcome::Undefined("no validation user with training history and unseen items".into()),
            }
        }
        FoldData::Unusable(_) => unreachable!(),
    }
}

/// What the final model needs at prediction time.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub task: TaskSpec,
    pub plan: Option<PreprocessPlan>,
    pub label_encoding: Option<(String, LabelEncoding)>,
    pub model: TrainedModel,
    /// Training interactions, top_n only.
    pub history: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub task: TaskSpec,
    pub selection_metric: SelectionMetric,
    pub split: SplitPlan,
    pub usable_rows: usize,
    pub trials: Vec<TrialResult>,
    pub winner: usize,
    pub fitted: FittedPipeline,
    pub test: Option<TestEvaluation>,
    pub log: Vec<LogEntry>,
    /// Wall-clock milliseconds per stage, in execution order.
    pub timings_ms: Vec<(&'static str, f64)>,
}

impl RunOutcome {
    pub fn winner_trial(&self) -> &TrialResult {
        &self.trials[self.winner]
    }
}

fn plan_log(plan: &PreprocessPlan, log: &mut Vec<LogEntry>) {
    for f in &plan.features {
        match &f.decision {
            FeatureDecision::Drop { reason } => {
                log.push(LogEntry::new(LogKind::DroppedColumn, f.column.clone(), reason.describe()));
            }
            FeatureDecision::Keep { plan: ColumnPlan::Numeric(n) } => {
                if n.train_missing > 0 {
                    log.push(LogEntry::new(
                        LogKind::ImputedColumn,
                        f.column.clone(),
                        format!("{} missing cells imputed with {}", n.train_missing, n.impute),
                    ));
                }
                if n.train_clipped > 0 {
                    log.push(LogEntry::new(
                        LogKind::ClippedColumn,
                        f.column.clone(),
                        format!("{} cells clipped to [{}, {}]", n.train_clipped, n.clip_low, n.clip_high),
                    ));
                }
            }
            FeatureDecision::Keep { .. } => {}
        }
    }
}

/// Runs the whole search on `train` and, when given, evaluates the winner on
/// `test`.
pub fn run_pipeline(
    train: &Dataset,
    test: Option<&Dataset>,
    task: &TaskSpec,
    config: &RunConfig,
) -> Result<RunOutcome, PipelineError> {
    let mut timings = Vec::new();
    let mut log = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };

    for name in train.ignored_columns() {
        log.push(LogEntry::new(LogKind::IgnoredColumn, name.clone(), "column not declared in the DsDL"));
    }
    let td = prepare_task_data(train, task, &config.preprocess, &mut log)?;
    let all_positions: Vec<usize> = (0..td.rows.len()).collect();

    // Summary plan on every usable row; only ctr needs it to predict.
    let plan = match fit_plan_rows(train, &td.rows, task, &config.preprocess) {
        Ok(p) => {
            plan_log(&p, &mut log);
            Some(p)
        }
        Err(e) if task.kind == TaskKind::Ctr => return Err(e.into()),
        Err(e) => {
            log.push(LogEntry::new(LogKind::Warning, "features", format!("no preprocessing summary: {e}")));
            None
        }
    };
    lap("preprocess", &mut timings);

    let split_settings = SplitSettings { seed: config.seed, ..config.split };
    let split = make_splits(td.rows.len(), td.timestamps.as_deref(), &split_settings)?;
    log.push(LogEntry::new(
        LogKind::SplitChoice,
        "validation",
        match &split.kind {
            crate::autotune::SplitKind::Kfold { k } => format!("seeded {k}-fold cross-validation"),
            crate::autotune::SplitKind::Temporal { holdout_fraction } => {
                format!("temporal holdout of the latest {holdout_fraction} of rows")
            }
        },
    ));

    let (models, notes) = compatible_models(task);
    for n in notes {
        log.push(LogEntry::new(LogKind::SkippedModel, "mf", n));
    }
    let candidates = enumerate_candidates(&models, config.strategy, config.seed)?;
    let metric = SelectionMetric::for_task(task.kind);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    let trials = pool.install(|| {
        let folds: Vec<FoldData> = split
            .folds
            .par_iter()
            .map(|f| build_fold(train, &td, task, &f.train, &f.validation, &config.preprocess))
            .collect();
        run_search(&candidates, folds.len(), metric, |c, f| score_fold(c, &folds[f]))
    });
    lap("search", &mut timings);

    for t in trials.iter().filter(|t| t.status == TrialStatus::Failed) {
        log.push(LogEntry::new(
            LogKind::FailedTrial,
            format!("trial {}", t.index),
            format!("{} ({}) scored worst-possible: {}", t.model_id, t.hyperparameters, t.notes.join("; ")),
        ));
    }
    let best = select_best(&trials, metric)?;
    let winner = best.index;

    let input = match task.kind {
        TaskKind::Ctr => ctr_input(train, &td, task, &all_positions, &config.preprocess)?.1,
        TaskKind::Rating => td.rating_input(&all_positions),
        TaskKind::TopN => TrainInput::TopN { pairs: td.pairs(&all_positions) },
    };
    let model = train_candidate(best.model_id, &best.hyperparameters, best.seed, &input)
        .map_err(|source| PipelineError::FinalTraining { model: best.model_id, source })?;
    let fitted = FittedPipeline {
        task: task.clone(),
        plan,
        label_encoding: td.label_encoding.clone(),
        model,
        history: if task.kind == TaskKind::TopN { td.pairs(&all_positions) } else { Vec::new() },
    };
    lap("final_fit", &mut timings);

    let test_eval = match test {
        Some(t) => {
            let e = evaluate_test(&fitted, t, config.top_k)?;
            for entry in &e.log {
                log.push(entry.clone());
            }
            Some(e)
        }
        None => None,
    };
    lap("test", &mut timings);

    Ok(RunOutcome {
        task: task.clone(),
        selection_metric: metric,
        split,
        usable_rows: td.rows.len(),
        trials,
        winner,
        fitted,
        test: test_eval,
        log,
        timings_ms: timings,
    })
}

/// Training history per user.
pub fn histories(pairs: &[(String, String)]) -> BTreeMap<&str, HashSet<String>> {
    let mut out: BTreeMap<&str, HashSet<String>> = BTreeMap::new();
    for (u, i) in pairs {
        out.entry(u.as_str()).or_default().insert(i.clone());
    }
    out
}
