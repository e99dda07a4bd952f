//! The JSON run report. Keys are sorted (serde_json's default map is a
//! BTreeMap) so identical runs produce identical bytes, apart from
//! `timings_ms`.

use dares_core::pipeline::{RunConfig, RunOutcome};
use dares_core::DsdlSchema;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub struct InputDigest {
    pub role: &'static str,
    pub sha256: String,
    pub bytes: usize,
}

impl InputDigest {
    pub fn of(role: &'static str, content: &[u8]) -> Self {
        let hash = Sha256::digest(content);
        InputDigest {
            role,
            sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
            bytes: content.len(),
        }
    }
}

fn value<T: serde::Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

pub fn build_report(
    inputs: &[InputDigest],
    schema: &DsdlSchema,
    config: &RunConfig,
    train_rows: usize,
    outcome: &RunOutcome,
) -> Value {
    let mut digests = Map::new();
    for d in inputs {
        digests.insert(d.role.to_string(), json!({ "sha256": d.sha256, "bytes": d.bytes }));
    }
    let winner = outcome.winner_trial();
    let mut timings = Map::new();
    for (stage, ms) in &outcome.timings_ms {
        timings.insert(stage.to_string(), json!(ms));
    }
    json!({
        "tool": { "name": "dares", "version": env!("CARGO_PKG_VERSION") },
        "inputs": digests,
        "seed": config.seed,
        "config": value(config),
        "schema": value(schema),
        "task": value(&outcome.task),
        "data": { "rows": train_rows, "usable_rows": outcome.usable_rows },
        "preprocess": value(&outcome.fitted.plan),
        "split": {
            "plan": value(&outcome.split),
            "fold_sizes": outcome.split.fold_sizes().iter()
                .map(|(t, v)| json!({ "train": t, "validation": v }))
                .collect::<Vec<_>>(),
        },
        "selection_metric": outcome.selection_metric.to_string(),
        "trials": value(&outcome.trials),
        "winner": {
            "trial": winner.index,
            "model_id": winner.model_id.as_str(),
            "hyperparameters": value(&winner.hyperparameters),
            "cv_score": value(&winner.mean_score),
            "fold_scores": value(&winner.fold_scores),
        },
        "model": value(&outcome.fitted.model),
        "test": outcome.test.as_ref().map(|t| value(&t.metrics)),
        "decision_log": value(&outcome.log),
        "timings_ms": timings,
    })
}
