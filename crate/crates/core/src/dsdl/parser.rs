//! YAML front end for DsDL.
//!
//! The YAML text is first turned into a small located node tree (built from
//! the `yaml-rust2` event stream so that every key and value keeps its
//! line/column), then walked against the DsDL layout:
//!
//! ```yaml
//! DsDL:
//!   features: [ { col_name: ..., type: ... }, ... ]
//!   user_id: { col_name: ... }
//!   item_id: { col_name: ... }
//!   timestamp: { col_name: ... }
//!   label: [ { name: ..., type: ... }, ... ]
//! ```
//!
//! Keys are case-sensitive. Unknown keys are errors unless
//! [`ParseOptions::lax`] is set, in which case they become warnings.
//! Duplicate keys in any mapping are always errors.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

use super::model::{
    validate_schema, ColumnRef, DsdlSchema, FeatureDecl, FeatureType, LabelDecl, SchemaCandidate,
    SchemaError, SchemaPath,
};

/// 1-based position in source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn new(line: usize, column: usize) -> Self {
        Location { line, column }
    }

    fn from_marker(m: Marker) -> Self {
        Location { line: m.line().max(1), column: m.col() + 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// A located, coded message. Shared by every stage that reports problems
/// with user input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub location: Option<Location>,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, location: Option<Location>) -> Self {
        Diagnostic { severity: Severity::Error, code, message: message.into(), location }
    }

    pub fn warning(code: &'static str, message: impl Into<String>, location: Option<Location>) -> Self {
        Diagnostic { severity: Severity::Warning, code, message: message.into(), location }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `error[CODE] file:line:col: message`
    pub fn render(&self, file: &str) -> String {
        match self.location {
            Some(loc) => format!(
                "{}[{}] {}:{}:{}: {}",
                self.severity, self.code, file, loc.line, loc.column, self.message
            ),
            None => format!("{}[{}] {}: {}", self.severity, self.code, file, self.message),
        }
    }
}

pub mod codes {
    pub const NOT_UTF8: &str = "NotUtf8";
    pub const MALFORMED_DOCUMENT: &str = "MalformedDocument";
    pub const MISSING_ROOT: &str = "MissingRoot";
    pub const MISSING_KEY: &str = "MissingKey";
    pub const TYPE_UNKNOWN: &str = "TypeUnknown";
    pub const UNKNOWN_KEY: &str = "UnknownKey";
    pub const DUPLICATE_KEY: &str = "DuplicateKey";
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Downgrade unknown keys to warnings.
    pub lax: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDsdl {
    pub schema: DsdlSchema,
    pub warnings: Vec<Diagnostic>,
}

/// Parses DsDL YAML in strict mode.
pub fn parse_dsdl(source: &[u8]) -> Result<DsdlSchema, Vec<Diagnostic>> {
    parse_dsdl_with(source, &ParseOptions::default()).map(|p| p.schema)
}

pub fn parse_dsdl_with(source: &[u8], options: &ParseOptions) -> Result<ParsedDsdl, Vec<Diagnostic>> {
    let text = match std::str::from_utf8(source) {
        Ok(t) => t,
        Err(e) => {
            let loc = byte_location(source, e.valid_up_to());
            return Err(vec![Diagnostic::error(
                codes::NOT_UTF8,
                format!("input is not valid UTF-8 (invalid byte at offset {})", e.valid_up_to()),
                Some(loc),
            )]);
        }
    };

    let root = load_tree(text)?;
    let mut walker = Walker { options: *options, diags: Vec::new(), name_locs: HashMap::new() };
    let candidate = walker.document(root.as_ref());

    let (errors, warnings): (Vec<_>, Vec<_>) = walker.diags.into_iter().partition(|d| d.is_error());
    if !errors.is_empty() {
        return Err(errors);
    }
    let (candidate, features_loc, label_loc) = match candidate {
        Some(c) => c,
        None => {
            return Err(vec![Diagnostic::error(
                codes::MALFORMED_DOCUMENT,
                "document could not be interpreted as DsDL",
                None,
            )])
        }
    };
    match validate_schema(candidate) {
        Ok(schema) => Ok(ParsedDsdl { schema, warnings }),
        Err(errs) => Err(errs
            .into_iter()
            .map(|e| {
                let loc = match &e {
                    SchemaError::EmptyFeatures => Some(features_loc),
                    SchemaError::EmptyLabels => label_loc,
                    other => other.path().and_then(|p| walker.name_locs.get(&p).copied()),
                };
                Diagnostic::error(e.code(), e.to_string(), loc)
            })
            .collect()),
    }
}

fn byte_location(source: &[u8], offset: usize) -> Location {
    let before = &source[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
    Location { line, column }
}

// ---------------------------------------------------------------------------
// Located node tree

#[derive(Debug)]
enum NodeKind {
    Scalar { value: String, plain: bool },
    Seq(Vec<Node>),
    Map(Vec<(Node, Node)>),
    Alias,
}

#[derive(Debug)]
struct Node {
    kind: NodeKind,
    loc: Location,
}

impl Node {
    fn describe(&self) -> &'static str {
        match self.kind {
            NodeKind::Scalar { .. } => "a scalar",
            NodeKind::Seq(_) => "a list",
            NodeKind::Map(_) => "a mapping",
            NodeKind::Alias => "an alias",
        }
    }

    /// Scalar text with YAML null spellings collapsed to the empty string.
    fn scalar_text(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Scalar { value, plain: true } if matches!(value.as_str(), "~" | "null" | "Null" | "NULL") => Some(""),
            NodeKind::Scalar { value, .. } => Some(value),
            _ => None,
        }
    }
}

enum Frame {
    Seq(Location, Vec<Node>),
    Map(Location, Vec<Node>),
}

#[derive(Default)]
struct TreeBuilder {
    stack: Vec<Frame>,
    docs: Vec<Node>,
}

impl TreeBuilder {
    fn push(&mut self, node: Node) {
        match self.stack.last_mut() {
            Some(Frame::Seq(_, items)) | Some(Frame::Map(_, items)) => items.push(node),
            None => self.docs.push(node),
        }
    }
}

impl MarkedEventReceiver for TreeBuilder {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        let loc = Location::from_marker(mark);
        match ev {
            Event::Scalar(value, style, _, _) => {
                let plain = style == TScalarStyle::Plain;
                self.push(Node { kind: NodeKind::Scalar { value, plain }, loc });
            }
            Event::Alias(_) => self.push(Node { kind: NodeKind::Alias, loc }),
            Event::SequenceStart(..) => self.stack.push(Frame::Seq(loc, Vec::new())),
            Event::MappingStart(..) => self.stack.push(Frame::Map(loc, Vec::new())),
            Event::SequenceEnd => {
                if let Some(Frame::Seq(loc, items)) = self.stack.pop() {
                    self.push(Node { kind: NodeKind::Seq(items), loc });
                }
            }
            Event::MappingEnd => {
                if let Some(Frame::Map(start, items)) = self.stack.pop() {
                    // Block mappings report their start after the first key;
                    // the first key is the more useful anchor.
                    let loc = items.first().map_or(start, |k| k.loc.min(start));
                    let mut pairs = Vec::with_capacity(items.len() / 2);
                    let mut it = items.into_iter();
                    while let (Some(k), Some(v)) = (it.next(), it.next()) {
                        pairs.push((k, v));
                    }
                    self.push(Node { kind: NodeKind::Map(pairs), loc });
                }
            }
            Event::Nothing
            | Event::StreamStart
            | Event::StreamEnd
            | Event::DocumentStart
            | Event::DocumentEnd => {}
        }
    }
}

fn load_tree(text: &str) -> Result<Option<Node>, Vec<Diagnostic>> {
    let mut builder = TreeBuilder::default();
    let mut parser = Parser::new_from_str(text);
    if let Err(e) = parser.load(&mut builder, true) {
        return Err(vec![Diagnostic::error(
            codes::MALFORMED_DOCUMENT,
            format!("YAML syntax error: {}", e.info()),
            Some(Location::from_marker(*e.marker())),
        )]);
    }
    if builder.docs.len() > 1 {
        let loc = builder.docs[1].loc;
        return Err(vec![Diagnostic::error(
            codes::MALFORMED_DOCUMENT,
            "expected a single YAML document",
            Some(loc),
        )]);
    }
    Ok(builder.docs.pop())
}

// ---------------------------------------------------------------------------
// DsDL walk

struct Walker {
    options: ParseOptions,
    diags: Vec<Diagnostic>,
    name_locs: HashMap<SchemaPath, Location>,
}

type Candidate = (SchemaCandidate, Location, Option<Location>);

impl Walker {
    fn error(&mut self, code: &'static str, message: String, loc: Location) {
        self.diags.push(Diagnostic::error(code, message, Some(loc)));
    }

    fn unknown_key(&mut self, key: &str, context: &str, loc: Location) {
        let message = format!("unknown key `{key}` in {context}");
        if self.options.lax {
            self.diags.push(Diagnostic::warning(codes::UNKNOWN_KEY, message, Some(loc)));
        } else {
            self.error(codes::UNKNOWN_KEY, message, loc);
        }
    }

    /// Checks that `node` is a mapping with scalar, non-duplicated keys and
    /// returns its entries.
    fn mapping<'n>(&mut self, node: &'n Node, context: &str) -> Option<Vec<(&'n str, &'n Node, Location)>> {
        let pairs = match &node.kind {
            NodeKind::Map(pairs) => pairs,
            _ => {
                self.error(
                    codes::MALFORMED_DOCUMENT,
                    format!("{context} must be a mapping, found {}", node.describe()),
                    node.loc,
                );
                return None;
            }
        };
        let mut out: Vec<(&str, &Node, Location)> = Vec::with_capacity(pairs.len());
        for (k, v) in pairs {
            let key = match &k.kind {
                NodeKind::Scalar { value, .. } => value.as_str(),
                _ => {
                    self.error(
                        codes::MALFORMED_DOCUMENT,
                        format!("keys in {context} must be plain strings, found {}", k.describe()),
                        k.loc,
                    );
                    continue;
                }
            };
            if let Some((_, _, first)) = out.iter().find(|(seen, _, _)| *seen == key) {
                let message = format!(
                    "duplicate key `{key}` in {context} (first defined at line {}, column {})",
                    first.line, first.column
                );
                self.error(codes::DUPLICATE_KEY, message, k.loc);
                continue;
            }
            out.push((key, v, k.loc));
        }
        Some(out)
    }

    fn sequence<'n>(&mut self, node: &'n Node, context: &str) -> Option<&'n [Node]> {
        match &node.kind {
            NodeKind::Seq(items) => Some(items),
            _ => {
                self.error(
                    codes::MALFORMED_DOCUMENT,
                    format!("{context} must be a list, found {}", node.describe()),
                    node.loc,
                );
                None
            }
        }
    }

    /// A flat entry such as `{ col_name: x, type: numeric }`: every field
    /// must be present and scalar, no others allowed.
    fn flat_entry<'n>(
        &mut self,
        node: &'n Node,
        fields: &[&'static str],
        context: &str,
    ) -> Option<Vec<(&'n str, Location)>> {
        let entries = self.mapping(node, context)?;
        let mut values: Vec<Option<(&str, Location)>> = vec![None; fields.len()];
        let mut ok = true;
        for (key, value, key_loc) in entries {
            let Some(slot) = fields.iter().position(|f| *f == key) else {
                self.unknown_key(key, context, key_loc);
                continue;
            };
            match value.scalar_text() {
                Some(text) => values[slot] = Some((text, value.loc)),
                None => {
                    self.error(
                        codes::MALFORMED_DOCUMENT,
                        format!("`{key}` in {context} must be a scalar, found {}", value.describe()),
                        value.loc,
                    );
                    ok = false;
                }
            }
        }
        for (field, value) in fields.iter().zip(&values) {
            if value.is_none() && ok {
                self.error(codes::MISSING_KEY, format!("{context} is missing `{field}`"), node.loc);
                ok = false;
            }
        }
        if ok {
            values.into_iter().collect()
        } else {
            None
        }
    }

    fn feature_type(&mut self, text: &str, loc: Location) -> Option<FeatureType> {
        match text.parse::<FeatureType>() {
            Ok(t) => Some(t),
            Err(_) => {
                self.error(
                    codes::TYPE_UNKNOWN,
                    format!(
                        "unknown type `{text}` (expected one of: categorical, ordinal, numeric, binary, textual, url)"
                    ),
                    loc,
                );
                None
            }
        }
    }

    fn document(&mut self, root: Option<&Node>) -> Option<Candidate> {
        let Some(root) = root else {
            self.error(codes::MISSING_ROOT, "document is empty; expected a top-level `DsDL` key".into(), Location::new(1, 1));
            return None;
        };
        let entries = match &root.kind {
            NodeKind::Map(_) => self.mapping(root, "the document root")?,
            _ => {
                self.error(
                    codes::MISSING_ROOT,
                    format!("expected a top-level `DsDL` mapping, found {}", root.describe()),
                    root.loc,
                );
                return None;
            }
        };
        let mut body = None;
        for (key, value, loc) in entries {
            if key == "DsDL" {
                body = Some(value);
            } else {
                self.unknown_key(key, "the document root", loc);
            }
        }
        match body {
            Some(b) => self.body(b),
            None => {
                self.error(codes::MISSING_ROOT, "missing top-level `DsDL` key".into(), root.loc);
                None
            }
        }
    }

    fn body(&mut self, node: &Node) -> Option<Candidate> {
        let entries = self.mapping(node, "`DsDL`")?;
        let mut candidate = SchemaCandidate::default();
        let mut features_loc = None;
        let mut label_loc = None;
        for (key, value, key_loc) in entries {
            match key {
                "features" => {
                    features_loc = Some(key_loc);
                    candidate.features = self.features(value);
                }
                "user_id" => candidate.user_id = self.column_ref(value, "user_id", SchemaPath::UserId),
                "item_id" => candidate.item_id = self.column_ref(value, "item_id", SchemaPath::ItemId),
                "timestamp" => candidate.timestamp = self.column_ref(value, "timestamp", SchemaPath::Timestamp),
                "label" => {
                    label_loc = Some(key_loc);
                    candidate.labels = self.labels(value);
                }
                other => self.unknown_key(other, "`DsDL`", key_loc),
            }
        }
        let Some(features_loc) = features_loc else {
            self.error(codes::MISSING_KEY, "`DsDL` is missing `features`".into(), node.loc);
            return None;
        };
        Some((candidate, features_loc, label_loc))
    }

    fn features(&mut self, node: &Node) -> Vec<FeatureDecl> {
        let Some(items) = self.sequence(node, "`features`") else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let context = format!("features[{i}]");
            let Some(fields) = self.flat_entry(item, &["col_name", "type"], &context) else {
                continue;
            };
            let (name, name_loc) = fields[0];
            let (ty, ty_loc) = fields[1];
            let Some(ty) = self.feature_type(ty, ty_loc) else {
                continue;
            };
            self.name_locs.insert(SchemaPath::Feature(out.len()), name_loc);
            out.push(FeatureDecl::new(name, ty));
        }
        out
    }

    fn labels(&mut self, node: &Node) -> Option<Vec<LabelDecl>> {
        let items = self.sequence(node, "`label`")?;
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let context = format!("label[{i}]");
            let Some(fields) = self.flat_entry(item, &["name", "type"], &context) else {
                continue;
            };
            let (name, name_loc) = fields[0];
            let (ty, ty_loc) = fields[1];
            let Some(ty) = self.feature_type(ty, ty_loc) else {
                continue;
            };
            self.name_locs.insert(SchemaPath::Label(out.len()), name_loc);
            out.push(LabelDecl::new(name, ty));
        }
        Some(out)
    }

    fn column_ref(&mut self, node: &Node, key: &str, path: SchemaPath) -> Option<ColumnRef> {
        let fields = self.flat_entry(node, &["col_name"], &format!("`{key}`"))?;
        let (name, loc) = fields[0];
        self.name_locs.insert(path, loc);
        Some(ColumnRef::new(name))
    }
}

// ---------------------------------------------------------------------------
// Emitter

/// Writes `schema` in the canonical layout (same key order and flow style as
/// the reference example). Re-parsing the output yields an equal schema.
pub fn emit_dsdl(schema: &DsdlSchema) -> String {
    let mut out = String::from("DsDL:\n  features: [\n");
    let n = schema.features().len();
    for (i, f) in schema.features().iter().enumerate() {
        let sep = if i + 1 < n { "," } else { "" };
        out.push_str(&format!("    {{ col_name: {}, type: {} }}{sep}\n", quote(&f.col_name), f.ty));
    }
    out.push_str("  ]\n");
    for (key, value) in [
        ("user_id", schema.user_id()),
        ("item_id", schema.item_id()),
        ("timestamp", schema.timestamp()),
    ] {
        if let Some(v) = value {
            out.push_str(&format!("  {key}: {{ col_name: {} }}\n", quote(v)));
        }
    }
    if schema.has_label_section() {
        out.push_str("  label: [\n");
        let n = schema.labels().len();
        for (i, l) in schema.labels().iter().enumerate() {
            let sep = if i + 1 < n { "," } else { "" };
            out.push_str(&format!("    {{ name: {}, type: {} }}{sep}\n", quote(&l.name), l.ty));
        }
        out.push_str("  ]\n");
    }
    out
}

fn is_plain_safe(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphanumeric() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/'))
        && !matches!(s, "null" | "Null" | "NULL")
}

fn quote(s: &str) -> String {
    if is_plain_safe(s) {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if c.is_control() || matches!(c, '\u{2028}' | '\u{2029}' | '\u{feff}') => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use FeatureType::*;

    pub const SAMPLE_SCHEMA: &str = "DsDL:
  features: [
    { col_name: age, type: numeric },
    { col_name: is_subscriber, type: binary },
    { col_name: product_cat, type: categorical },
    { col_name: product_desc, type: textual },
    { col_name: product_price, type: numeric },
    { col_name: product_satisfaction_level, type: ordinal },
    { col_name: product_image, type: url }
  ]
  user_id: { col_name: usr_id }
  item_id: { col_name: product_id }
  timestamp: { col_name: ts }
  label: [
    { name: purchase_decision, type: binary }
  ]
";

    fn codes_of(r: Result<DsdlSchema, Vec<Diagnostic>>) -> Vec<&'static str> {
        r.unwrap_err().iter().map(|d| d.code).collect()
    }

    #[test]
    fn parses_sample_schema() {
        let s = parse_dsdl(SAMPLE_SCHEMA.as_bytes()).unwrap();
        let got: Vec<_> = s.features().iter().map(|f| (f.col_name.as_str(), f.ty)).collect();
        assert_eq!(
            got,
            vec![
                ("age", Numeric),
                ("is_subscriber", Binary),
                ("product_cat", Categorical),
                ("product_desc", Textual),
                ("product_price", Numeric),
                ("product_satisfaction_level", Ordinal),
                ("product_image", Url),
            ]
        );
        assert_eq!(s.user_id(), Some("usr_id"));
        assert_eq!(s.item_id(), Some("product_id"));
        assert_eq!(s.timestamp(), Some("ts"));
        assert_eq!(s.labels(), &[LabelDecl::new("purchase_decision", Binary)]);
    }

    #[test]
    fn unknown_type_is_located() {
        let src = "DsDL: { features: [ { col_name: x, type: integer } ] }";
        let errs = parse_dsdl(src.as_bytes()).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, codes::TYPE_UNKNOWN);
        assert!(errs[0].message.contains("integer"));
        assert_eq!(errs[0].location, Some(Location::new(1, 42)));
    }

    #[test]
    fn minimal_inline_schema() {
        let s = parse_dsdl(b"DsDL: { features: [ { col_name: x, type: numeric } ] }").unwrap();
        assert_eq!(s.features(), &[FeatureDecl::new("x", Numeric)]);
        assert!(s.user_id().is_none() && s.item_id().is_none() && s.timestamp().is_none());
        assert!(!s.has_label_section());
    }

    #[test]
    fn bogus_type_reports_its_line() {
        for (idx, line) in SAMPLE_SCHEMA.lines().enumerate() {
            if !line.contains("type: numeric") {
                continue;
            }
            let patched: String = SAMPLE_SCHEMA
                .lines()
                .enumerate()
                .map(|(i, l)| if i == idx { l.replace("type: numeric", "type: bogus") } else { l.to_string() })
                .collect::<Vec<_>>()
                .join("\n");
            let errs = parse_dsdl(patched.as_bytes()).unwrap_err();
            assert_eq!(errs[0].code, codes::TYPE_UNKNOWN);
            assert_eq!(errs[0].location.unwrap().line, idx + 1);
        }
    }

    #[test]
    fn typo_key_is_rejected_strict_but_warned_lax() {
        let src = "DsDL:\n  features: [ { col_nmae: x, col_name: x, type: numeric } ]\n";
        let errs = parse_dsdl(src.as_bytes()).unwrap_err();
        assert_eq!(errs[0].code, codes::UNKNOWN_KEY);
        assert!(errs[0].message.contains("col_nmae"));
        let parsed = parse_dsdl_with(src.as_bytes(), &ParseOptions { lax: true }).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].severity, Severity::Warning);
    }

    #[test]
    fn duplicate_keys_are_errors() {
        let src = "DsDL:\n  features: [ { col_name: x, type: numeric, type: binary } ]\n";
        assert_eq!(codes_of(parse_dsdl(src.as_bytes())), vec![codes::DUPLICATE_KEY]);
        let src = "DsDL:\n  features: [ { col_name: x, type: numeric } ]\n  features: [ { col_name: y, type: numeric } ]\n";
        assert_eq!(codes_of(parse_dsdl(src.as_bytes())), vec![codes::DUPLICATE_KEY]);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(codes_of(parse_dsdl(b"")), vec![codes::MISSING_ROOT]);
        assert_eq!(codes_of(parse_dsdl(b"dsdl: {features: []}")), vec![codes::UNKNOWN_KEY, codes::MISSING_ROOT]);
        assert_eq!(codes_of(parse_dsdl(b"- a\n- b\n")), vec![codes::MISSING_ROOT]);
        assert_eq!(codes_of(parse_dsdl(b"DsDL: {user_id: {col_name: u}}")), vec![codes::MISSING_KEY]);
        assert_eq!(codes_of(parse_dsdl(b"DsDL: {features: [{col_name: x}]}")), vec![codes::MISSING_KEY]);
        assert_eq!(
            codes_of(parse_dsdl(b"DsDL: {features: [{col_name: [x], type: numeric}]}")),
            vec![codes::MALFORMED_DOCUMENT]
        );
        assert_eq!(codes_of(parse_dsdl(b"DsDL: {features: [x")), vec![codes::MALFORMED_DOCUMENT]);
        assert_eq!(codes_of(parse_dsdl(b"DsDL: {features: []}")), vec!["EmptyFeatures"]);
        assert_eq!(codes_of(parse_dsdl(b"\xff\xfe")), vec![codes::NOT_UTF8]);
    }

    #[test]
    fn validation_errors_carry_locations() {
        let src = "DsDL:\n  features: [\n    { col_name: a, type: numeric },\n    { col_name: a, type: binary }\n  ]\n";
        let errs = parse_dsdl(src.as_bytes()).unwrap_err();
        assert_eq!(errs[0].code, "DuplicateName");
        assert_eq!(errs[0].location, Some(Location::new(4, 17)));
    }

    #[test]
    fn not_utf8_location() {
        let errs = parse_dsdl(b"DsDL:\n  fe\xc3\x28").unwrap_err();
        assert_eq!(errs[0].location, Some(Location::new(2, 5)));
    }

    #[test]
    fn render_format() {
        let d = Diagnostic::error("TypeUnknown", "unknown type `x`", Some(Location::new(3, 7)));
        assert_eq!(d.render("a.yaml"), "error[TypeUnknown] a.yaml:3:7: unknown type `x`");
    }

    #[test]
    fn emit_round_trips_sample_schema() {
        let s = parse_dsdl(SAMPLE_SCHEMA.as_bytes()).unwrap();
        let text = emit_dsdl(&s);
        assert_eq!(text, SAMPLE_SCHEMA);
        assert_eq!(parse_dsdl(text.as_bytes()).unwrap(), s);
    }

    #[test]
    fn emit_minimal() {
        let s = parse_dsdl(b"DsDL: { features: [ { col_name: x, type: numeric } ] }").unwrap();
        assert_eq!(emit_dsdl(&s), "DsDL:\n  features: [\n    { col_name: x, type: numeric }\n  ]\n");
    }

    #[test]
    fn emit_quotes_awkward_names() {
        for name in ["a b", "x: y", "#c", "null", "\"q\"", "back\\slash", "tab\there", " lead", "é", "1,2", "-x"] {
            let c = SchemaCandidate { features: vec![FeatureDecl::new(name, Numeric)], ..Default::default() };
            let s = validate_schema(c).unwrap();
            let back = parse_dsdl(emit_dsdl(&s).as_bytes()).unwrap();
            assert_eq!(back, s, "name {name:?}");
        }
    }
}
