//! Recommender tasks and their resolution against a schema.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsdl::{DsdlSchema, FeatureType};

/// The task the user asks for. Never inferred from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Ctr,
    Rating,
    TopN,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Ctr, TaskKind::Rating, TaskKind::TopN];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Ctr => "ctr",
            TaskKind::Rating => "rating",
            TaskKind::TopN => "top_n",
        }
    }

    /// Label types a task can learn from; empty when the task needs none.
    pub fn label_types(self) -> &'static [FeatureType] {
        match self {
            TaskKind::Ctr => &[FeatureType::Binary],
            TaskKind::Rating => &[FeatureType::Numeric, FeatureType::Ordinal],
            TaskKind::TopN => &[],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown task `{0}` (expected one of: ctr, rating, top_n)")]
pub struct UnknownTask(pub String);

impl FromStr for TaskKind {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

/// A task bound to concrete schema columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub label: Option<String>,
    pub label_type: Option<FeatureType>,
    pub user_id: Option<String>,
    pub item_id: Option<String>,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task `{task}` needs a label of type {}", join_types(.required))]
    MissingLabelForTask { task: TaskKind, required: Vec<FeatureType> },
    #[error("task `{0}` needs both `user_id` and `item_id` in the DsDL file")]
    MissingUserItemIds(TaskKind),
    #[error("label `{name}` is not declared in the DsDL file")]
    UnknownLabel { name: String },
    #[error("label `{name}` has type {found}, but task `{task}` needs {}", join_types(.required))]
    LabelTypeMismatch { name: String, found: FeatureType, task: TaskKind, required: Vec<FeatureType> },
}

impl TaskError {
    pub fn code(&self) -> &'static str {
        match self {
            TaskError::MissingLabelForTask { .. } => "MissingLabelForTask",
            TaskError::MissingUserItemIds(_) => "MissingUserItemIds",
            TaskError::UnknownLabel { .. } => "UnknownLabel",
            TaskError::LabelTypeMismatch { .. } => "LabelTypeMismatch",
        }
    }
}

fn join_types(types: &[FeatureType]) -> String {
    types.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" or ")
}

/// Resolves `task` against `schema`.
///
/// The label is the first declared label whose type suits the task, unless
/// `label_override` names one explicitly. `top_n` needs no label but does
/// need both id columns.
pub fn task_compatibility(
    schema: &DsdlSchema,
    task: TaskKind,
    label_override: Option<&str>,
) -> Result<TaskSpec, Vec<TaskError>> {
    let mut errors = Vec::new();
    let required = task.label_types();

    let label = if required.is_empty() {
        None
    } else if let Some(name) = label_override {
        match schema.label(name) {
            None => {
                errors.push(TaskError::UnknownLabel { name: name.to_string() });
                None
            }
            Some(l) if !required.contains(&l.ty) => {
                errors.push(TaskError::LabelTypeMismatch {
                    name: name.to_string(),
                    found: l.ty,
                    task,
                    required: required.to_vec(),
                });
                None
            }
            Some(l) => Some(l),
        }
    } else {
        let found = schema.labels().iter().find(|l| required.contains(&l.ty));
        if found.is_none() {
            errors.push(TaskError::MissingLabelForTask { task, required: required.to_vec() });
        }
        found
    };

    if task == TaskKind::TopN && (schema.user_id().is_none() || schema.item_id().is_none()) {
        errors.push(TaskError::MissingUserItemIds(task));
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(TaskSpec {
        kind: task,
        label: label.map(|l| l.name.clone()),
        label_type: label.map(|l| l.ty),
        user_id: schema.user_id().map(str::to_string),
        item_id: schema.item_id().map(str::to_string),
        timestamp: schema.timestamp().map(str::to_string),
    })
}
