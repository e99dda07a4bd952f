//! CSV loading bound to a DsDL schema.
//!
//! Dialect: comma separated, double-quote quoting (`""` escapes a quote),
//! mandatory header row, UTF-8. A cell is missing when it is empty or the
//! literal `NA`. Header names are matched byte for byte.

use std::collections::HashMap;
use std::path::Path;

use chrono::DateTime;
use thiserror::Error;

use crate::dsdl::{Diagnostic, DsdlSchema, FeatureType};

/// Upper bound on cell-level errors collected before giving up.
const MAX_CELL_ERRORS: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Number(f64),
    Flag(bool),
    Text(String),
    /// Seconds since the Unix epoch.
    Time(i64),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            Cell::Flag(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_time(&self) -> Option<i64> {
        match self {
            Cell::Time(t) => Some(*t),
            _ => None,
        }
    }
}

/// What a column is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Feature(FeatureType),
    Label(FeatureType),
    UserId,
    ItemId,
    Timestamp,
}

impl ColumnRole {
    pub fn declared_type(self) -> Option<FeatureType> {
        match self {
            ColumnRole::Feature(t) | ColumnRole::Label(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedColumn {
    pub name: String,
    pub role: ColumnRole,
    pub cells: Vec<Cell>,
}

impl TypedColumn {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        self.cells.iter().map(Cell::is_missing).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }
}

/// An immutable, schema-bound table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DsdlSchema,
    columns: Vec<TypedColumn>,
    index: HashMap<String, usize>,
    row_count: usize,
    ignored_columns: Vec<String>,
}

impl Dataset {
    pub fn schema(&self) -> &DsdlSchema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column(&self, name: &str) -> Option<&TypedColumn> {
        self.index.get(name).map(|&i| &self.columns[i])
    }

    pub fn columns(&self) -> &[TypedColumn] {
        &self.columns
    }

    /// CSV columns not mentioned by the schema; loaded nowhere.
    pub fn ignored_columns(&self) -> &[String] {
        &self.ignored_columns
    }

    /// Builds a dataset directly from typed columns. Used by tests and
    /// benchmarks that synthesise data without going through CSV.
    pub fn from_columns(schema: DsdlSchema, columns: Vec<TypedColumn>) -> Result<Dataset, IngestError> {
        let row_count = columns.first().map_or(0, TypedColumn::len);
        if let Some(c) = columns.iter().find(|c| c.len() != row_count) {
            return Err(IngestError::RaggedColumn { column: c.name.clone() });
        }
        let index = columns.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        Ok(Dataset { schema, columns, index, row_count, ignored_columns: Vec::new() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("the file is empty (a header row is required)")]
    EmptyFile,
    #[error("column `{0}` is declared in the DsDL file but missing from the CSV header")]
    MissingColumn(String),
    #[error("column `{0}` appears more than once in the CSV header")]
    DuplicateColumn(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("column `{column}` row {row}: cannot parse `{raw}` as {expected}")]
    CellParseError { column: String, row: usize, raw: String, expected: &'static str },
    #[error("row {row} is not valid UTF-8")]
    NotUtf8 { row: usize },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("column `{column}` length differs from the other columns")]
    RaggedColumn { column: String },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::EmptyFile => "EmptyFile",
            IngestError::MissingColumn(_) => "MissingColumn",
            IngestError::DuplicateColumn(_) => "DuplicateColumn",
            IngestError::RaggedRow { .. } => "RaggedRow",
            IngestError::CellParseError { .. } => "CellParseError",
            IngestError::NotUtf8 { .. } => "NotUtf8",
            IngestError::Malformed(_) => "MalformedCsv",
            IngestError::Io { .. } => "Io",
            IngestError::RaggedColumn { .. } => "RaggedColumn",
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::error(self.code(), self.to_string(), None)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Accept a file whose header lacks the label columns (unlabeled test
    /// sets).
    pub labels_optional: bool,
}

pub fn load_dataset(path: &Path, schema: &DsdlSchema, options: &LoadOptions) -> Result<Dataset, Vec<IngestError>> {
    let bytes = std::fs::read(path).map_err(|e| {
        vec![IngestError::Io { path: path.display().to_string(), reason: e.to_string() }]
    })?;
    load_dataset_from_bytes(&bytes, schema, options)
}

pub fn load_dataset_from_bytes(
    bytes: &[u8],
    schema: &DsdlSchema,
    options: &LoadOptions,
) -> Result<Dataset, Vec<IngestError>> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    if bytes.is_empty() {
        return Err(vec![IngestError::EmptyFile]);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header: Vec<Vec<u8>> = match reader.byte_headers() {
        Ok(h) => h.iter().map(<[u8]>::to_vec).collect(),
        Err(e) => return Err(vec![IngestError::Malformed(e.to_string())]),
    };
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(vec![IngestError::EmptyFile]);
    }

    let mut positions: HashMap<&[u8], usize> = HashMap::new();
    let mut errors = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if positions.insert(name.as_slice(), i).is_some() {
            errors.push(IngestError::DuplicateColumn(String::from_utf8_lossy(name).into_owned()));
        }
    }

    let mut wanted: Vec<(String, ColumnRole)> = schema
        .features()
        .iter()
        .map(|f| (f.col_name.clone(), ColumnRole::Feature(f.ty)))
        .collect();
    for (name, role) in [
        (schema.user_id(), ColumnRole::UserId),
        (schema.item_id(), ColumnRole::ItemId),
        (schema.timestamp(), ColumnRole::Timestamp),
    ] {
        if let Some(n) = name {
            wanted.push((n.to_string(), role));
        }
    }
    for l in schema.labels() {
        let present = positions.contains_key(l.name.as_bytes());
        if present || !options.labels_optional {
            wanted.push((l.name.clone(), ColumnRole::Label(l.ty)));
        }
    }

    let mut bound: Vec<(usize, String, ColumnRole)> = Vec::with_capacity(wanted.len());
    for (name, role) in wanted {
        match positions.get(name.as_bytes()) {
            Some(&pos) => bound.push((pos, name, role)),
            None => errors.push(IngestError::MissingColumn(name)),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let used: Vec<usize> = bound.iter().map(|(p, _, _)| *p).collect();
    let ignored_columns = header
        .iter()
        .enumerate()
        .filter(|(i, _)| !used.contains(i))
        .map(|(_, n)| String::from_utf8_lossy(n).into_owned())
        .collect();

    let mut cells: Vec<Vec<Cell>> = vec![Vec::new(); bound.len()];
    let mut row_count = 0usize;
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                errors.push(IngestError::Malformed(e.to_string()));
                break;
            }
        }
        row_count += 1;
        let row = row_count;
        if record.len() != header.len() {
            errors.push(IngestError::RaggedRow { row, expected: header.len(), found: record.len() });
            if errors.len() >= MAX_CELL_ERRORS {
                break;
            }
            continue;
        }
        for (slot, (pos, name, role)) in bound.iter().enumerate() {
            let raw = match std::str::from_utf8(&record[*pos]) {
                Ok(s) => s,
                Err(_) => {
                    errors.push(IngestError::NotUtf8 { row });
                    break;
                }
            };
            match parse_cell(raw, *role) {
                Ok(c) => cells[slot].push(c),
                Err(expected) => errors.push(IngestError::CellParseError {
                    column: name.clone(),
                    row,
                    raw: raw.to_string(),
                    expected,
                }),
            }
        }
        if errors.len() >= MAX_CELL_ERRORS {
            break;
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let columns: Vec<TypedColumn> = bound
        .into_iter()
        .zip(cells)
        .map(|((_, name, role), cells)| TypedColumn { name, role, cells })
        .collect();
    let index = columns.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
    Ok(Dataset { schema: schema.clone(), columns, index, row_count, ignored_columns })
}

pub fn is_missing_marker(raw: &str) -> bool {
    raw.is_empty() || raw == "NA"
}

/// Parses one raw cell for a column of the given role. The error value names
/// the expected form.
pub fn parse_cell(raw: &str, role: ColumnRole) -> Result<Cell, &'static str> {
    if is_missing_marker(raw) {
        return Ok(Cell::Missing);
    }
    match role {
        ColumnRole::Feature(t) | ColumnRole::Label(t) => match t {
            FeatureType::Numeric => parse_number(raw).map(Cell::Number).ok_or("a finite number"),
            FeatureType::Binary => parse_flag(raw).map(Cell::Flag).ok_or("a binary value (0/1, true/false, yes/no)"),
            FeatureType::Categorical | FeatureType::Ordinal | FeatureType::Textual | FeatureType::Url => {
                Ok(Cell::Text(raw.to_string()))
            }
        },
        ColumnRole::UserId | ColumnRole::ItemId => Ok(Cell::Text(raw.to_string())),
        ColumnRole::Timestamp => parse_timestamp(raw).map(Cell::Time).ok_or("an integer or RFC 3339 timestamp"),
    }
}

pub fn parse_number(raw: &str) -> Option<f64> {
    let t = raw.trim();
    // `f64::from_str` also accepts inf/infinity/nan spellings.
    if t.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
        return None;
    }
    t.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn parse_flag(raw: &str) -> Option<bool> {
    let t = raw.trim();
    if t == "1" || t.eq_ignore_ascii_case("true") || t.eq_ignore_ascii_case("yes") {
        Some(true)
    } else if t == "0" || t.eq_ignore_ascii_case("false") || t.eq_ignore_ascii_case("no") {
        Some(false)
    } else {
        None
    }
}

pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let t = raw.trim();
    if let Ok(v) = t.parse::<i64>() {
        return Some(v);
    }
    DateTime::parse_from_rfc3339(t).ok().map(|d| d.timestamp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsdl::parse_dsdl;

    const SAMPLE_SCHEMA: &[u8] = include_bytes!("../tests/corpus/valid/sample_schema.yaml");

    fn sample_schema() -> DsdlSchema {
        parse_dsdl(SAMPLE_SCHEMA).unwrap()
    }

    const SAMPLE_SCHEMA_CSV: &str = "\
usr_id,product_id,ts,age,is_subscriber,product_cat,product_desc,product_price,product_satisfaction_level,product_image,purchase_decision,extra
u1,p1,1700000000,34,yes,books,\"A thick, heavy book\",12.5,high,http://x/1.png,1,z
u2,p2,2024-01-02T03:04:05Z,,no,toys,NA,3,low,http://x/2.png,0,z
u1,p2,1700000100,51,TRUE,toys,small car,3,mid,,no,z
";

    #[test]
    fn binds_sample_schema_columns() {
        let d = load_dataset_from_bytes(SAMPLE_SCHEMA_CSV.as_bytes(), &sample_schema(), &LoadOptions::default()).unwrap();
        assert_eq!(d.row_count(), 3);
        assert_eq!(d.columns().len(), 11);
        assert_eq!(d.ignored_columns(), &["extra".to_string()]);
        let age = d.column("age").unwrap();
        assert_eq!(age.missing_mask(), vec![false, true, false]);
        assert_eq!(age.cells[0], Cell::Number(34.0));
        let sub = d.column("is_subscriber").unwrap();
        assert_eq!(sub.cells, vec![Cell::Flag(true), Cell::Flag(false), Cell::Flag(true)]);
        assert_eq!(d.column("ts").unwrap().cells[1], Cell::Time(1704164645));
        assert_eq!(d.column("product_desc").unwrap().cells[0], Cell::Text("A thick, heavy book".into()));
        assert!(d.column("product_desc").unwrap().cells[1].is_missing());
        assert_eq!(d.column("purchase_decision").unwrap().cells[2], Cell::Flag(false));
    }

    #[test]
    fn missing_declared_column() {
        let csv = SAMPLE_SCHEMA_CSV.replacen(",age,", ",agee,", 1);
        let errs = load_dataset_from_bytes(csv.as_bytes(), &sample_schema(), &LoadOptions::default()).unwrap_err();
        assert_eq!(errs, vec![IngestError::MissingColumn("age".into())]);
    }

    #[test]
    fn header_match_is_exact() {
        let csv = SAMPLE_SCHEMA_CSV.replacen(",age,", ",Age,", 1);
        let errs = load_dataset_from_bytes(csv.as_bytes(), &sample_schema(), &LoadOptions::default()).unwrap_err();
        assert_eq!(errs[0].code(), "MissingColumn");
    }

    #[test]
    fn binary_literals() {
        let role = ColumnRole::Feature(FeatureType::Binary);
        for (raw, want) in [("yes", true), ("No", false), ("1", true), ("0", false), ("TRUE", true), ("false", false)] {
            assert_eq!(parse_cell(raw, role), Ok(Cell::Flag(want)));
        }
        assert_eq!(parse_cell("", role), Ok(Cell::Missing));
        assert_eq!(parse_cell("NA", role), Ok(Cell::Missing));
        assert!(parse_cell("2", role).is_err());
        assert!(parse_cell("y", role).is_err());
    }

    #[test]
    fn numeric_rejects_non_finite() {
        let role = ColumnRole::Feature(FeatureType::Numeric);
        for raw in ["NaN", "nan", "inf", "-inf", "infinity", "1e400", "abc"] {
            assert!(parse_cell(raw, role).is_err(), "{raw}");
        }
        assert_eq!(parse_cell("-1.5e2", role), Ok(Cell::Number(-150.0)));
        assert_eq!(parse_cell("na", role).is_err(), true);
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("42"), Some(42));
        assert_eq!(parse_timestamp("1970-01-01T00:01:00+00:00"), Some(60));
        assert_eq!(parse_timestamp("1970-01-01T01:00:00+01:00"), Some(0));
        assert_eq!(parse_timestamp("2024-01-02"), None);
    }

    #[test]
    fn ragged_and_parse_errors_are_reported() {
        let schema = parse_dsdl(b"DsDL: { features: [ { col_name: x, type: numeric } ] }").unwrap();
        let errs = load_dataset_from_bytes(b"x,y\n1,2\n3\nfoo,4\n", &schema, &LoadOptions::default()).unwrap_err();
        assert_eq!(errs[0], IngestError::RaggedRow { row: 2, expected: 2, found: 1 });
        assert_eq!(errs[1].code(), "CellParseError");
        assert!(matches!(&errs[1], IngestError::CellParseError { row: 3, .. }));
    }

    #[test]
    fn empty_file() {
        let schema = parse_dsdl(b"DsDL: { features: [ { col_name: x, type: numeric } ] }").unwrap();
        assert_eq!(
            load_dataset_from_bytes(b"", &schema, &LoadOptions::default()).unwrap_err(),
            vec![IngestError::EmptyFile]
        );
        let d = load_dataset_from_bytes(b"x\n", &schema, &LoadOptions::default()).unwrap();
        assert_eq!(d.row_count(), 0);
    }

    #[test]
    fn labels_optional_for_test_files() {
        let csv = "usr_id,product_id,ts,age,is_subscriber,product_cat,product_desc,product_price,product_satisfaction_level,product_image\nu,p,1,2,0,a,b,3,c,d\n";
        let strict = load_dataset_from_bytes(csv.as_bytes(), &sample_schema(), &LoadOptions::default());
        assert_eq!(strict.unwrap_err(), vec![IngestError::MissingColumn("purchase_decision".into())]);
        let d = load_dataset_from_bytes(csv.as_bytes(), &sample_schema(), &LoadOptions { labels_optional: true }).unwrap();
        assert!(d.column("purchase_decision").is_none());
    }

    #[test]
    fn loading_is_deterministic() {
        let a = load_dataset_from_bytes(SAMPLE_SCHEMA_CSV.as_bytes(), &sample_schema(), &LoadOptions::default()).unwrap();
        let b = load_dataset_from_bytes(SAMPLE_SCHEMA_CSV.as_bytes(), &sample_schema(), &LoadOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
