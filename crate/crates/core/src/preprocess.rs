//! Type-driven preprocessing: feature selection, imputation, encoding and
//! outlier clipping, fitted once on training rows and then frozen.
//!
//! Per declared type:
//!
//! | type        | kept as                                                   |
//! |-------------|-----------------------------------------------------------|
//! | numeric     | mean-imputed, clipped to mean ± z·σ, then z-scored        |
//! | binary      | 0/1, mode-imputed                                         |
//! | categorical | one-hot over the training vocabulary (+ missing flag)     |
//! | ordinal     | rank / (levels − 1), mode-imputed                         |
//! | textual     | FNV-1a hashed bag of words, L2-normalised per row         |
//! | url         | always dropped (media is never fetched)                   |
//!
//! Columns are dropped when constant, or when categorical/textual with a
//! distinct value on every row. Ordinal levels have no declared order: they
//! are ordered numerically when they look like numbers and lexicographically
//! otherwise, numbers first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::dsdl::{DsdlSchema, FeatureType};
use crate::ingest::{parse_number, Cell, Dataset, TypedColumn};
use crate::task::TaskSpec;

pub const DEFAULT_NOISE_Z: f64 = 4.0;
pub const DEFAULT_HASH_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreprocessOptions {
    /// Clip numeric values to mean ± `noise_z` standard deviations.
    pub noise_z: f64,
    /// Buckets per textual column.
    pub hash_dim: usize,
    /// Drop exact duplicate training rows before fitting.
    pub dedup_rows: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions { noise_z: DEFAULT_NOISE_Z, hash_dim: DEFAULT_HASH_DIM, dedup_rows: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("every feature column was dropped; nothing left to learn from")]
    NoUsableFeatures,
    #[error("dataset schema does not match the schema the plan was fitted on")]
    SchemaMismatch,
    #[error("every value of label `{0}` is missing")]
    AllLabelsMissing(String),
    #[error("the task has no label column")]
    NoLabel,
    #[error("invalid preprocessing option: {0}")]
    InvalidOption(String),
}

impl PreprocessError {
    pub fn code(&self) -> &'static str {
        match self {
            PreprocessError::NoUsableFeatures => "NoUsableFeatures",
            PreprocessError::SchemaMismatch => "SchemaMismatch",
            PreprocessError::AllLabelsMissing(_) => "AllLabelsMissing",
            PreprocessError::NoLabel => "NoLabel",
            PreprocessError::InvalidOption(_) => "InvalidOption",
        }
    }
}

/// Ordered levels of an ordinal column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMap {
    levels: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl RankMap {
    /// Uses `levels` in the given order.
    pub fn from_ordered<S: Into<String>>(levels: impl IntoIterator<Item = S>) -> Self {
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        let lookup = levels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        RankMap { levels, lookup }
    }

    /// Orders the distinct values: numeric-looking first (by value), then the
    /// rest byte-lexicographically.
    pub fn infer<'a>(values: impl IntoIterator<Item = &'a str>) -> Self {
        let mut distinct: Vec<&str> = values.into_iter().collect::<HashSet<_>>().into_iter().collect();
        distinct.sort_by(|a, b| ordinal_cmp(a, b));
        RankMap::from_ordered(distinct)
    }

    pub fn rank(&self, value: &str) -> Option<usize> {
        self.lookup.get(value).copied()
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

impl Serialize for RankMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.levels.serialize(s)
    }
}

fn ordinal_cmp(a: &str, b: &str) -> Ordering {
    match (parse_number(a), parse_number(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Constant,
    IdLike,
    UrlUnfetched,
}

impl DropReason {
    pub fn describe(self) -> &'static str {
        match self {
            DropReason::Constant => "constant column (zero variance or a single category)",
            DropReason::IdLike => "identifier-like column (a distinct value on every row)",
            DropReason::UrlUnfetched => "url column (linked media is not fetched)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericPlan {
    pub impute: f64,
    pub mean: f64,
    pub stddev: f64,
    pub clip_low: f64,
    pub clip_high: f64,
    pub train_missing: usize,
    pub train_clipped: usize,
}

impl NumericPlan {
    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.clip_low, self.clip_high)
    }

    pub fn transform(&self, cell: Option<f64>) -> f64 {
        let x = cell.map_or(self.impute, |x| self.clip(x));
        (x - self.mean) / self.stddev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ColumnPlan {
    Numeric(NumericPlan),
    Binary { impute: bool },
    OneHot { vocabulary: Vec<String>, missing_indicator: bool },
    OrdinalRank { ranks: RankMap, impute_rank: usize },
    HashedText { hash_dim: usize },
}

impl ColumnPlan {
    fn width(&self) -> usize {
        match self {
            ColumnPlan::Numeric(_) | ColumnPlan::Binary { .. } | ColumnPlan::OrdinalRank { .. } => 1,
            ColumnPlan::OneHot { vocabulary, missing_indicator } => vocabulary.len() + usize::from(*missing_indicator),
            ColumnPlan::HashedText { hash_dim } => *hash_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum FeatureDecision {
    Keep { plan: ColumnPlan },
    Drop { reason: DropReason },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeaturePlan {
    pub column: String,
    #[serde(rename = "type")]
    pub ty: FeatureType,
    #[serde(flatten)]
    pub decision: FeatureDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LabelEncoding {
    Binary,
    Numeric,
    Ordinal { ranks: RankMap },
}

/// Everything needed to turn a same-schema dataset into a matrix. Nothing
/// is recomputed when the plan is applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessPlan {
    #[serde(skip)]
    schema: DsdlSchema,
    pub features: Vec<FeaturePlan>,
    pub label: Option<(String, LabelEncoding)>,
    pub noise_z: f64,
    pub hash_dim: usize,
    pub fitted_rows: usize,
}

impl PreprocessPlan {
    pub fn n_outputs(&self) -> usize {
        self.features
            .iter()
            .map(|f| match &f.decision {
                FeatureDecision::Keep { plan } => plan.width(),
                FeatureDecision::Drop { .. } => 0,
            })
            .sum()
    }

    pub fn dropped(&self) -> impl Iterator<Item = (&str, DropReason)> {
        self.features.iter().filter_map(|f| match f.decision {
            FeatureDecision::Drop { reason } => Some((f.column.as_str(), reason)),
            FeatureDecision::Keep { .. } => None,
        })
    }

    pub fn column_plan(&self, column: &str) -> Option<&ColumnPlan> {
        self.features.iter().find(|f| f.column == column).and_then(|f| match &f.decision {
            FeatureDecision::Keep { plan } => Some(plan),
            FeatureDecision::Drop { .. } => None,
        })
    }

    /// Output provenance, one entry per matrix column.
    pub fn provenance(&self) -> Vec<ColumnProvenance> {
        let mut out = Vec::with_capacity(self.n_outputs());
        for f in &self.features {
            let FeatureDecision::Keep { plan } = &f.decision else { continue };
            let src = || f.column.clone();
            match plan {
                ColumnPlan::Numeric(_) => out.push(ColumnProvenance { source: src(), kind: TransformKind::ZScore }),
                ColumnPlan::Binary { .. } => out.push(ColumnProvenance { source: src(), kind: TransformKind::Binary }),
                ColumnPlan::OneHot { vocabulary, missing_indicator } => {
                    out.extend(vocabulary.iter().map(|v| ColumnProvenance {
                        source: src(),
                        kind: TransformKind::OneHot { category: v.clone() },
                    }));
                    if *missing_indicator {
                        out.push(ColumnProvenance { source: src(), kind: TransformKind::MissingIndicator });
                    }
                }
                ColumnPlan::OrdinalRank { .. } => {
                    out.push(ColumnProvenance { source: src(), kind: TransformKind::OrdinalRank })
                }
                ColumnPlan::HashedText { hash_dim } => out.extend((0..*hash_dim).map(|bucket| ColumnProvenance {
                    source: src(),
                    kind: TransformKind::HashBucket { bucket },
                })),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    ZScore,
    Binary,
    OneHot { category: String },
    MissingIndicator,
    OrdinalRank,
    HashBucket { bucket: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnProvenance {
    pub source: String,
    #[serde(flatten)]
    pub kind: TransformKind,
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    pub col_provenance: Vec<ColumnProvenance>,
    /// Matrix row → dataset row.
    pub kept_row_index: Vec<usize>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        FeatureMatrix {
            data: rows.into_iter().flatten().collect(),
            n_rows,
            n_cols,
            col_provenance: (0..n_cols)
                .map(|i| ColumnProvenance { source: format!("x{i}"), kind: TransformKind::ZScore })
                .collect(),
            kept_row_index: (0..n_rows).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows `idx` of this matrix, in order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            data,
            n_rows: idx.len(),
            n_cols: self.n_cols,
            col_provenance: self.col_provenance.clone(),
            kept_row_index: idx.iter().map(|&i| self.kept_row_index[i]).collect(),
        }
    }
}

fn feature_values<'a>(col: &'a TypedColumn, rows: &'a [usize]) -> impl Iterator<Item = &'a Cell> + 'a {
    rows.iter().map(move |&r| &col.cells[r])
}

/// Fits on every row of `train`.
pub fn fit_plan(train: &Dataset, task: &TaskSpec, options: &PreprocessOptions) -> Result<PreprocessPlan, PreprocessError> {
    let rows: Vec<usize> = (0..train.row_count()).collect();
    fit_plan_rows(train, &rows, task, options)
}

/// Fits on the given training rows only.
pub fn fit_plan_rows(
    train: &Dataset,
    rows: &[usize],
    task: &TaskSpec,
    options: &PreprocessOptions,
) -> Result<PreprocessPlan, PreprocessError> {
    if !(options.noise_z.is_finite() && options.noise_z > 0.0) {
        return Err(PreprocessError::InvalidOption(format!("noise z must be positive, got {}", options.noise_z)));
    }
    if options.hash_dim == 0 {
        return Err(PreprocessError::InvalidOption("hash dimension must be at least 1".into()));
    }
    let mut features = Vec::with_capacity(train.schema().features().len());
    for decl in train.schema().features() {
        let col = train.column(&decl.col_name).ok_or(PreprocessError::SchemaMismatch)?;
        let decision = match fit_column(col, decl.ty, rows, options) {
            Ok(plan) => FeatureDecision::Keep { plan },
            Err(reason) => FeatureDecision::Drop { reason },
        };
        features.push(FeaturePlan { column: decl.col_name.clone(), ty: decl.ty, decision });
    }
    if features.iter().all(|f| matches!(f.decision, FeatureDecision::Drop { .. })) {
        return Err(PreprocessError::NoUsableFeatures);
    }

    let label = match (&task.label, task.label_type) {
        (Some(name), Some(ty)) => {
            let enc = match ty {
                FeatureType::Binary => LabelEncoding::Binary,
                FeatureType::Ordinal => {
                    let col = train.column(name).ok_or(PreprocessError::SchemaMismatch)?;
                    LabelEncoding::Ordinal { ranks: RankMap::infer(feature_values(col, rows).filter_map(Cell::as_text)) }
                }
                _ => LabelEncoding::Numeric,
            };
            Some((name.clone(), enc))
        }
        _ => None,
    };

    Ok(PreprocessPlan {
        schema: train.schema().clone(),
        features,
        label,
        noise_z: options.noise_z,
        hash_dim: options.hash_dim,
        fitted_rows: rows.len(),
    })
}

fn fit_column(col: &TypedColumn, ty: FeatureType, rows: &[usize], options: &PreprocessOptions) -> Result<ColumnPlan, DropReason> {
    match ty {
        FeatureType::Url => Err(DropReason::UrlUnfetched),
        FeatureType::Numeric => fit_numeric(col, rows, options.noise_z).map(ColumnPlan::Numeric),
        FeatureType::Binary => {
            let flags: Vec<bool> = feature_values(col, rows).filter_map(Cell::as_flag).collect();
            let ones = flags.iter().filter(|&&b| b).count();
            if ones == 0 || ones == flags.len() {
                return Err(DropReason::Constant);
            }
            // ties impute 0
            Ok(ColumnPlan::Binary { impute: ones * 2 > flags.len() })
        }
        FeatureType::Categorical => {
            let distinct = distinct_texts(col, rows)?;
            let missing = feature_values(col, rows).any(Cell::is_missing);
            Ok(ColumnPlan::OneHot { vocabulary: distinct.into_iter().collect(), missing_indicator: missing })
        }
        FeatureType::Ordinal => {
            let texts: Vec<&str> = feature_values(col, rows).filter_map(Cell::as_text).collect();
            let ranks = RankMap::infer(texts.iter().copied());
            if ranks.len() < 2 {
                return Err(DropReason::Constant);
            }
            let mut counts = vec![0usize; ranks.len()];
            for t in &texts {
                counts[ranks.rank(t).expect("fitted level")] += 1;
            }
            // Most frequent level; lowest rank wins ties.
            let impute_rank = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map_or(0, |(i, _)| i);
            Ok(ColumnPlan::OrdinalRank { ranks, impute_rank })
        }
        FeatureType::Textual => {
            distinct_texts(col, rows)?;
            Ok(ColumnPlan::HashedText { hash_dim: options.hash_dim })
        }
    }
}

/// Sorted distinct non-missing values, or a drop reason.
fn distinct_texts(col: &TypedColumn, rows: &[usize]) -> Result<Vec<String>, DropReason> {
    let set: std::collections::BTreeSet<&str> = feature_values(col, rows).filter_map(Cell::as_text).collect();
    if set.len() <= 1 {
        return Err(DropReason::Constant);
    }
    if set.len() == rows.len() {
        return Err(DropReason::IdLike);
    }
    Ok(set.into_iter().map(str::to_string).collect())
}

fn mean_and_pop_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fit_numeric(col: &TypedColumn, rows: &[usize], z: f64) -> Result<NumericPlan, DropReason> {
    let observed: Vec<f64> = feature_values(col, rows).filter_map(Cell::as_number).collect();
    if observed.is_empty() || observed.iter().all(|&x| x == observed[0]) {
        return Err(DropReason::Constant);
    }
    let (raw_mean, raw_std) = mean_and_pop_std(&observed);
    let (clip_low, clip_high) = (raw_mean - z * raw_std, raw_mean + z * raw_std);
    let mut train_clipped = 0;
    let clipped: Vec<f64> = observed
        .iter()
        .map(|&x| {
            let c = x.clamp(clip_low, clip_high);
            if c != x {
                train_clipped += 1;
            }
            c
        })
        .collect();
    let impute = clipped.iter().sum::<f64>() / clipped.len() as f64;
    let train_missing = rows.len() - observed.len();
    // Statistics of the column exactly as it will be fed to the z-score:
    // clipped values plus imputed cells (which sit at the mean).
    let sq: f64 = clipped.iter().map(|x| (x - impute) * (x - impute)).sum();
    let stddev = (sq / rows.len() as f64).sqrt();
    if !(stddev > 0.0 && stddev.is_finite()) {
        return Err(DropReason::Constant);
    }
    Ok(NumericPlan { impute, mean: impute, stddev, clip_low, clip_high, train_missing, train_clipped })
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Writes the L2-normalised hashed bag of words for `text` into `out`
/// (which must be zeroed and `hash_dim` long).
pub fn hash_text_into(text: &str, out: &mut [f64]) {
    let dim = out.len() as u64;
    for token in tokenize(text) {
        out[(fnv1a64(token.as_bytes()) % dim) as usize] += 1.0;
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Transforms every row of `data`.
pub fn apply_plan(plan: &PreprocessPlan, data: &Dataset) -> Result<FeatureMatrix, PreprocessError> {
    let rows: Vec<usize> = (0..data.row_count()).collect();
    apply_plan_rows(plan, data, &rows)
}

/// Transforms the given rows of `data`, one matrix row each.
pub fn apply_plan_rows(plan: &PreprocessPlan, data: &Dataset, rows: &[usize]) -> Result<FeatureMatrix, PreprocessError> {
    if data.schema().features() != plan.schema.features() {
        return Err(PreprocessError::SchemaMismatch);
    }
    let mut kept: Vec<(&TypedColumn, &ColumnPlan)> = Vec::new();
    for f in &plan.features {
        if let FeatureDecision::Keep { plan: cp } = &f.decision {
            kept.push((data.column(&f.column).ok_or(PreprocessError::SchemaMismatch)?, cp));
        }
    }
    let n_cols = plan.n_outputs();
    let mut data_buf = vec![0.0; rows.len() * n_cols];
    if n_cols > 0 {
        data_buf.par_chunks_mut(n_cols).zip(rows.par_iter()).for_each(|(out, &r)| {
            let mut at = 0;
            for (col, cp) in &kept {
                at += encode_cell(&col.cells[r], cp, &mut out[at..]);
            }
        });
    }
    Ok(FeatureMatrix {
        data: data_buf,
        n_rows: rows.len(),
        n_cols,
        col_provenance: plan.provenance(),
        kept_row_index: rows.to_vec(),
    })
}

/// Encodes one cell into the head of `out`; returns the width written.
fn encode_cell(cell: &Cell, plan: &ColumnPlan, out: &mut [f64]) -> usize {
    match plan {
        ColumnPlan::Numeric(np) => {
            out[0] = np.transform(cell.as_number());
            1
        }
        ColumnPlan::Binary { impute } => {
            out[0] = if cell.as_flag().unwrap_or(*impute) { 1.0 } else { 0.0 };
            1
        }
        ColumnPlan::OneHot { vocabulary, missing_indicator } => {
            match cell.as_text() {
                Some(v) => {
                    if let Ok(i) = vocabulary.binary_search_by(|probe| probe.as_str().cmp(v)) {
                        out[i] = 1.0;
                    }
                }
                None if *missing_indicator => out[vocabulary.len()] = 1.0,
                None => {}
            }
            vocabulary.len() + usize::from(*missing_indicator)
        }
        ColumnPlan::OrdinalRank { ranks, impute_rank } => {
            let r = cell.as_text().and_then(|t| ranks.rank(t)).unwrap_or(*impute_rank);
            out[0] = r as f64 / (ranks.len() - 1) as f64;
            1
        }
        ColumnPlan::HashedText { hash_dim } => {
            if let Some(t) = cell.as_text() {
                hash_text_into(t, &mut out[..*hash_dim]);
            }
            *hash_dim
        }
    }
}

/// Numeric label values for the given rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl LabelVector {
    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// Encodes the task label: binary → 0/1, numeric → raw, ordinal → rank.
/// Missing (or unseen ordinal) labels are flagged and set to 0.
pub fn label_vector(plan: &PreprocessPlan, data: &Dataset, rows: &[usize]) -> Result<LabelVector, PreprocessError> {
    let (name, enc) = plan.label.as_ref().ok_or(PreprocessError::NoLabel)?;
    let col = data.column(name).ok_or(PreprocessError::SchemaMismatch)?;
    encode_labels(name, enc, col, rows)
}

pub fn encode_labels(name: &str, enc: &LabelEncoding, col: &TypedColumn, rows: &[usize]) -> Result<LabelVector, PreprocessError> {
    let mut values = Vec::with_capacity(rows.len());
    let mut missing = Vec::with_capacity(rows.len());
    for &r in rows {
        let cell = &col.cells[r];
        let v = match enc {
            LabelEncoding::Binary => cell.as_flag().map(|b| if b { 1.0 } else { 0.0 }),
            LabelEncoding::Numeric => cell.as_number(),
            LabelEncoding::Ordinal { ranks } => cell.as_text().and_then(|t| ranks.rank(t)).map(|r| r as f64),
        };
        values.push(v.unwrap_or(0.0));
        missing.push(v.is_none());
    }
    if !rows.is_empty() && missing.iter().all(|&m| m) {
        return Err(PreprocessError::AllLabelsMissing(name.to_string()));
    }
    Ok(LabelVector { values, missing })
}

/// Splits `rows` into (first occurrences, exact duplicates) comparing every
/// bound column.
pub fn dedup_rows(data: &Dataset, rows: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for &r in rows {
        let key = data.columns().iter().map(|c| format!("{:?}", c.cells[r])).collect::<Vec<_>>().join("\u{1f}");
        if seen.insert(key, r).is_some() {
            removed.push(r);
        } else {
            kept.push(r);
        }
    }
    (kept, removed)
}
