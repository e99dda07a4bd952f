//! Dataset-agnostic recommender pipeline.
//!
//! A DsDL file describes a tabular dataset; from it alone this crate
//! preprocesses the data, searches a small model zoo, picks a winner and
//! evaluates it. See the README for the command-line front end.

pub mod autotune;
pub mod dsdl;
pub mod evaluate;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod task;

pub use dsdl::{parse_dsdl, DsdlSchema, Diagnostic, FeatureType};
pub use task::{task_compatibility, TaskKind, TaskSpec};
