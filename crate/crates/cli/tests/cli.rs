use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SCHEMA: &str = "DsDL:
  features: [
    { col_name: age, type: numeric },
    { col_name: plan, type: categorical }
  ]
  user_id: { col_name: uid }
  item_id: { col_name: iid }
  label: [ { name: clicked, type: binary }, { name: stars, type: numeric } ]
";

fn dares(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dares"))
        .current_dir(dir)
        .args(args)
        .env_remove("DARES_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn table(rows: usize, with_labels: bool) -> String {
    let mut out = String::from(if with_labels { "uid,iid,age,plan,clicked,stars\n" } else { "uid,iid,age,plan\n" });
    for n in 0..rows {
        let age = 20 + (n * 7) % 50;
        let plan = ["free", "pro", "team"][n % 3];
        out.push_str(&format!("u{},i{},{age},{plan}", n % 17, n % 11));
        if with_labels {
            let clicked = u8::from(age > 40 || plan == "pro");
            out.push_str(&format!(",{clicked},{}", 1 + (n * 5 + n / 11) % 5));
        }
        out.push('\n');
    }
    out
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.yaml"), SCHEMA).unwrap();
    fs::write(dir.path().join("train.csv"), table(120, true)).unwrap();
    dir
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("dares-report.json")).unwrap()).unwrap()
}

#[test]
fn validate_accepts_good_schema() {
    let dir = setup();
    let o = dares(dir.path(), &["validate", "--dsdl", "s.yaml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = dares(dir.path(), &["validate", "--dsdl", "s.yaml", "--data", "train.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn validate_reports_located_type_error() {
    let dir = setup();
    fs::write(dir.path().join("bad.yaml"), SCHEMA.replace("type: numeric", "type: bogus")).unwrap();
    let o = dares(dir.path(), &["validate", "--dsdl", "bad.yaml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[TypeUnknown] bad.yaml:3:"), "{}", stderr(&o));
}

#[test]
fn validate_reports_missing_column() {
    let dir = setup();
    fs::write(dir.path().join("short.csv"), "uid,iid,plan,clicked,stars\nu1,i1,free,1,3\n").unwrap();
    let o = dares(dir.path(), &["validate", "--dsdl", "s.yaml", "--data", "short.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MissingColumn"), "{}", stderr(&o));
}

#[test]
fn top_n_without_item_id_is_a_data_error() {
    let dir = setup();
    fs::write(dir.path().join("noitem.yaml"), SCHEMA.replace("  item_id: { col_name: iid }\n", "")).unwrap();
    let o = dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "noitem.yaml", "--task", "top_n"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MissingUserItemIds"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = setup();
    assert_eq!(dares(dir.path(), &["run", "--data", "train.csv"]).status.code(), Some(1));
    assert_eq!(dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "ranking"]).status.code(), Some(1));
}

#[test]
fn ctr_resolves_the_binary_label() {
    let dir = setup();
    // only `clicked` is binary
    let o = dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "ctr"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path())["task"]["label"], "clicked");
}

#[test]
fn rating_with_labelled_test_reports_rmse() {
    let dir = setup();
    fs::write(dir.path().join("test.csv"), table(30, true)).unwrap();
    let o = dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "rating", "--test", "test.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert!(r["test"]["metrics"]["rmse"]["value"].as_f64().is_some(), "{}", r["test"]);
    let preds = fs::read_to_string(dir.path().join("dares-predictions.csv")).unwrap();
    assert!(preds.starts_with("row_index,prediction\n"));
    assert_eq!(preds.lines().count(), 31);
}

#[test]
fn unlabelled_test_gives_predictions_and_null_metrics() {
    let dir = setup();
    fs::write(dir.path().join("test.csv"), table(30, false)).unwrap();
    let o = dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "ctr", "--test", "test.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    let auc = &r["test"]["metrics"]["auc_roc"];
    assert!(auc["value"].is_null());
    assert_eq!(auc["reason"], "unlabeled test set");
    assert_eq!(fs::read_to_string(dir.path().join("dares-predictions.csv")).unwrap().lines().count(), 31);
}

#[test]
fn empty_test_file_is_a_data_error() {
    let dir = setup();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "ctr", "--test", "empty.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn top_n_predictions_have_ranked_layout() {
    let dir = setup();
    let o = dares(dir.path(), &["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "top_n", "--test", "train.csv", "--top-k", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let preds = fs::read_to_string(dir.path().join("dares-predictions.csv")).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next(), Some("user_id,rank,item_id,score"));
    assert!(lines.all(|l| l.split(',').count() == 4));
    let log = report(dir.path())["decision_log"].to_string();
    assert!(log.contains("unused"), "feature columns should be reported as unused: {log}");
}

#[test]
fn bad_thread_count_is_usage_error() {
    let dir = setup();
    let o = Command::new(env!("CARGO_BIN_EXE_dares"))
        .current_dir(dir.path())
        .args(["run", "--data", "train.csv", "--dsdl", "s.yaml", "--task", "ctr"])
        .env("DARES_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
