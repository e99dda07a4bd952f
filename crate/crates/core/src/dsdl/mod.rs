//! Dataset Description Language: the abstract schema and its YAML form.

mod model;
mod parser;

pub use model::{
    validate_schema, ColumnRef, DsdlSchema, FeatureDecl, FeatureType, LabelDecl, SchemaCandidate,
    SchemaError, SchemaPath, UnknownFeatureType,
};
pub use parser::{
    codes, emit_dsdl, parse_dsdl, parse_dsdl_with, Diagnostic, Location, ParseOptions, ParsedDsdl,
    Severity,
};
