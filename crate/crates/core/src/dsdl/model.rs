//! The abstract DsDL schema and its structural invariants.
//!
//! Everything here is independent of the YAML surface form: a
//! [`SchemaCandidate`] can be assembled by the parser, by tests, or by hand,
//! and [`validate_schema`] turns it into a [`DsdlSchema`] or reports every
//! violation it finds.
//!
//! Names are compared byte-wise and case-sensitively. Labels are keyed by
//! `name` while features, ids and timestamps are keyed by `col_name`; the
//! grammar uses the two spellings and both are kept as-is.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six column types a DsDL file may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureType {
    Categorical,
    Ordinal,
    Numeric,
    Binary,
    Textual,
    Url,
}

impl FeatureType {
    /// All members in grammar order.
    pub const ALL: [FeatureType; 6] = [
        FeatureType::Categorical,
        FeatureType::Ordinal,
        FeatureType::Numeric,
        FeatureType::Binary,
        FeatureType::Textual,
        FeatureType::Url,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureType::Categorical => "categorical",
            FeatureType::Ordinal => "ordinal",
            FeatureType::Numeric => "numeric",
            FeatureType::Binary => "binary",
            FeatureType::Textual => "textual",
            FeatureType::Url => "url",
        }
    }
}

impl fmt::Display for FeatureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Returned when a string is not one of the six type names.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown feature type `{0}`")]
pub struct UnknownFeatureType(pub String);

impl FromStr for FeatureType {
    type Err = UnknownFeatureType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownFeatureType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDecl {
    pub col_name: String,
    #[serde(rename = "type")]
    pub ty: FeatureType,
}

impl FeatureDecl {
    pub fn new(col_name: impl Into<String>, ty: FeatureType) -> Self {
        FeatureDecl { col_name: col_name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: FeatureType,
}

impl LabelDecl {
    pub fn new(name: impl Into<String>, ty: FeatureType) -> Self {
        LabelDecl { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub col_name: String,
}

impl ColumnRef {
    pub fn new(col_name: impl Into<String>) -> Self {
        ColumnRef { col_name: col_name.into() }
    }
}

/// An unvalidated schema, as produced by a front end.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaCandidate {
    pub features: Vec<FeatureDecl>,
    pub user_id: Option<ColumnRef>,
    pub item_id: Option<ColumnRef>,
    pub timestamp: Option<ColumnRef>,
    pub labels: Option<Vec<LabelDecl>>,
}

/// A schema that satisfies every DsDL invariant.
///
/// Only obtainable through [`validate_schema`], so holding one is proof of
/// validity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DsdlSchema {
    features: Vec<FeatureDecl>,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_id: Option<ColumnRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    item_id: Option<ColumnRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<ColumnRef>,
    #[serde(rename = "label", skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<LabelDecl>>,
}

impl DsdlSchema {
    pub fn features(&self) -> &[FeatureDecl] {
        &self.features
    }

    pub fn user_id(&self) -> Option<&str> {
        self.user_id.as_ref().map(|c| c.col_name.as_str())
    }

    pub fn item_id(&self) -> Option<&str> {
        self.item_id.as_ref().map(|c| c.col_name.as_str())
    }

    pub fn timestamp(&self) -> Option<&str> {
        self.timestamp.as_ref().map(|c| c.col_name.as_str())
    }

    /// Declared labels; empty when the file has no `label` section.
    pub fn labels(&self) -> &[LabelDecl] {
        self.labels.as_deref().unwrap_or(&[])
    }

    pub fn has_label_section(&self) -> bool {
        self.labels.is_some()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureDecl> {
        self.features.iter().find(|f| f.col_name == name)
    }

    pub fn label(&self, name: &str) -> Option<&LabelDecl> {
        self.labels().iter().find(|l| l.name == name)
    }

    /// Every column name the schema mentions, in declaration order:
    /// features, user id, item id, timestamp, labels.
    pub fn column_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.features.iter().map(|f| f.col_name.as_str()).collect();
        names.extend(self.user_id());
        names.extend(self.item_id());
        names.extend(self.timestamp());
        names.extend(self.labels().iter().map(|l| l.name.as_str()));
        names
    }

    pub fn into_candidate(self) -> SchemaCandidate {
        SchemaCandidate {
            features: self.features,
            user_id: self.user_id,
            item_id: self.item_id,
            timestamp: self.timestamp,
            labels: self.labels,
        }
    }

    /// Returns a copy with `user_id` removed. Removing a reference can never
    /// break validity.
    pub fn without_user_id(&self) -> DsdlSchema {
        DsdlSchema { user_id: None, ..self.clone() }
    }

    /// Returns a copy with `item_id` removed.
    pub fn without_item_id(&self) -> DsdlSchema {
        DsdlSchema { item_id: None, ..self.clone() }
    }
}

/// Where a name lives inside a schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemaPath {
    Feature(usize),
    UserId,
    ItemId,
    Timestamp,
    Label(usize),
}

impl fmt::Display for SchemaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaPath::Feature(i) => write!(f, "features[{i}].col_name"),
            SchemaPath::UserId => f.write_str("user_id.col_name"),
            SchemaPath::ItemId => f.write_str("item_id.col_name"),
            SchemaPath::Timestamp => f.write_str("timestamp.col_name"),
            SchemaPath::Label(i) => write!(f, "label[{i}].name"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("the feature list is empty; at least one feature is required")]
    EmptyFeatures,
    #[error("the label list is present but empty; omit `label` or declare at least one label")]
    EmptyLabels,
    #[error("name `{name}` at {at} is already used at {first}")]
    DuplicateName { name: String, first: SchemaPath, at: SchemaPath },
    #[error("empty name at {0}")]
    EmptyName(SchemaPath),
}

impl SchemaError {
    /// Stable diagnostic code.
    pub fn code(&self) -> &'static str {
        match self {
            SchemaError::EmptyFeatures => "EmptyFeatures",
            SchemaError::EmptyLabels => "EmptyLabels",
            SchemaError::DuplicateName { .. } => "DuplicateName",
            SchemaError::EmptyName(_) => "EmptyName",
        }
    }

    /// The schema position the error points at, if any.
    pub fn path(&self) -> Option<SchemaPath> {
        match self {
            SchemaError::EmptyFeatures | SchemaError::EmptyLabels => None,
            SchemaError::DuplicateName { at, .. } => Some(*at),
            SchemaError::EmptyName(p) => Some(*p),
        }
    }
}

/// Checks every structural invariant and returns all violations at once.
pub fn validate_schema(candidate: SchemaCandidate) -> Result<DsdlSchema, Vec<SchemaError>> {
    let mut errors = Vec::new();
    if candidate.features.is_empty() {
        errors.push(SchemaError::EmptyFeatures);
    }
    if matches!(&candidate.labels, Some(l) if l.is_empty()) {
        errors.push(SchemaError::EmptyLabels);
    }

    let mut named: Vec<(SchemaPath, &str)> = Vec::new();
    named.extend(
        candidate
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (SchemaPath::Feature(i), f.col_name.as_str())),
    );
    for (path, r) in [
        (SchemaPath::UserId, &candidate.user_id),
        (SchemaPath::ItemId, &candidate.item_id),
        (SchemaPath::Timestamp, &candidate.timestamp),
    ] {
        if let Some(r) = r {
            named.push((path, r.col_name.as_str()));
        }
    }
    if let Some(labels) = &candidate.labels {
        named.extend(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| (SchemaPath::Label(i), l.name.as_str())),
        );
    }

    let mut seen: HashMap<&str, SchemaPath> = HashMap::new();
    for (path, name) in named {
        if name.trim().is_empty() {
            errors.push(SchemaError::EmptyName(path));
            continue;
        }
        match seen.get(name) {
            Some(first) => errors.push(SchemaError::DuplicateName {
                name: name.to_string(),
                first: *first,
                at: path,
            }),
            None => {
                seen.insert(name, path);
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(DsdlSchema {
        features: candidate.features,
        user_id: candidate.user_id,
        item_id: candidate.item_id,
        timestamp: candidate.timestamp,
        labels: candidate.labels,
    })
}
