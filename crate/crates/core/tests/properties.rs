//! Property tests: metrics against brute-force oracles, split invariants,
//! DsDL round trips and preprocessing guarantees.

use std::collections::HashSet;

use dares_core::autotune::{kfold_split, temporal_split};
use dares_core::dsdl::{emit_dsdl, validate_schema, ColumnRef, FeatureDecl, LabelDecl, SchemaCandidate};
use dares_core::ingest::{load_dataset_from_bytes, LoadOptions};
use dares_core::metrics::{auc_roc, log_loss, mae, precision_recall_at_k, rmse, PROB_CLIP};
use dares_core::preprocess::{apply_plan, fit_plan, ColumnPlan, PreprocessOptions};
use dares_core::{parse_dsdl, task_compatibility, DsdlSchema, FeatureType, TaskKind};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs()))
}

// ---- oracles ----

fn auc_oracle(y: &[f64], s: &[f64]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1.0 && y[j] == 0.0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn log_loss_oracle(y: &[f64], p: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&y, &p)| {
            let p = p.max(PROB_CLIP).min(1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / y.len() as f64
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1.0 } else { 0.0 }), n),
            // a coarse grid forces plenty of ties
            prop::collection::vec((0i32..20).prop_map(|v| v as f64 / 19.0), n),
        )
    })
}

fn paired_reals() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=50).prop_flat_map(|n| (prop::collection::vec(-100.0..100.0f64, n), prop::collection::vec(-100.0..100.0f64, n)))
}

fn ranking_case() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<HashSet<u32>>)> {
    prop::collection::vec(
        (
            prop::collection::vec(0u32..30, 0..15).prop_map(|mut v| {
                let mut seen = HashSet::new();
                v.retain(|x| seen.insert(*x));
                v
            }),
            prop::collection::hash_set(0u32..30, 0..8),
        ),
        1..20,
    )
    .prop_map(|users| users.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pairwise_count((y, s) in labelled_scores()) {
        let got = auc_roc(&y, &s).unwrap();
        match (got, auc_oracle(&y, &s)) {
            (Some(a), Some(b)) => prop_assert!(close(a, b), "{a} vs {b}"),
            (None, None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms((y, s) in labelled_scores()) {
        let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
        let (a, b) = (auc_roc(&y, &s).unwrap(), auc_roc(&y, &t).unwrap());
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!(close(a, b)),
            (None, None) => {}
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn auc_of_negated_scores_is_complement((y, s) in labelled_scores()) {
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        if let (Some(a), Some(b)) = (auc_roc(&y, &s).unwrap(), auc_roc(&y, &neg).unwrap()) {
            prop_assert!(close(a + b, 1.0));
        }
    }

    #[test]
    fn log_loss_matches_oracle((y, p) in labelled_scores()) {
        let got = log_loss(&y, &p).unwrap();
        prop_assert!(got >= 0.0);
        prop_assert!(close(got, log_loss_oracle(&y, &p)));
    }

    #[test]
    fn constant_log_loss_is_minimal_at_base_rate((y, _) in labelled_scores(), q in 0.0..1.0f64) {
        let rate = y.iter().sum::<f64>() / y.len() as f64;
        let at_rate = log_loss(&y, &vec![rate; y.len()]).unwrap();
        let other = log_loss(&y, &vec![q; y.len()]).unwrap();
        prop_assert!(at_rate <= other + TOL);
    }

    #[test]
    fn rmse_and_mae_match_oracle((y, p) in paired_reals()) {
        let n = y.len() as f64;
        let sq: f64 = y.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
        let abs: f64 = y.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(close(rmse(&y, &p).unwrap(), (sq / n).sqrt()));
        prop_assert!(close(mae(&y, &p).unwrap(), abs / n));
        prop_assert!(mae(&y, &p).unwrap() <= rmse(&y, &p).unwrap() + TOL);
    }

    #[test]
    fn precision_recall_match_oracle((recs, rels) in ranking_case(), k in 1usize..20) {
        let got = precision_recall_at_k(&recs, &rels, k).unwrap();
        let (mut p, mut r, mut users) = (0.0, 0.0, 0usize);
        for (rec, rel) in recs.iter().zip(&rels) {
            if rel.is_empty() {
                continue;
            }
            users += 1;
            let top: Vec<&u32> = rec.iter().take(k).collect();
            let hits = top.iter().filter(|i| rel.contains(i)).count() as f64;
            if !top.is_empty() {
                p += hits / top.len() as f64;
            }
            r += hits / rel.len() as f64;
        }
        let d = users.max(1) as f64;
        prop_assert_eq!(got.users_evaluated, users);
        prop_assert_eq!(got.users_excluded, recs.len() - users);
        prop_assert!(close(got.precision, p / d));
        prop_assert!(close(got.recall, r / d));
    }

    #[test]
    fn recall_is_monotone_in_k((recs, rels) in ranking_case(), k in 1usize..20) {
        let a = precision_recall_at_k(&recs, &rels, k).unwrap().recall;
        let b = precision_recall_at_k(&recs, &rels, k + 1).unwrap().recall;
        prop_assert!(a <= b + TOL);
    }
}

// ---- splits ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn kfold_partitions_rows(n in 2usize..400, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let plan = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        let mut seen = vec![0usize; n];
        for f in &plan.folds {
            for &v in &f.validation {
                seen[v] += 1;
            }
            let train: HashSet<usize> = f.train.iter().copied().collect();
            prop_assert_eq!(train.len() + f.validation.len(), n);
            prop_assert!(f.validation.iter().all(|v| !train.contains(v)));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.validation.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(kfold_split(n, k, seed).unwrap(), plan);
    }

    #[test]
    fn temporal_validation_follows_training(ts in prop::collection::vec(-1000i64..1000, 2..200), f in 0.05..0.95f64) {
        let plan = temporal_split(&ts, f).unwrap();
        prop_assert_eq!(plan.folds.len(), 1);
        let fold = &plan.folds[0];
        prop_assert!(!fold.train.is_empty() && !fold.validation.is_empty());
        prop_assert_eq!(fold.train.len() + fold.validation.len(), ts.len());
        let last_train = fold.train.iter().map(|&i| ts[i]).max().unwrap();
        let first_val = fold.validation.iter().map(|&i| ts[i]).min().unwrap();
        prop_assert!(last_train <= first_val);
    }
}

// ---- DsDL round trip ----

const FRAGMENTS: &[&str] = &[
    "a", "price", " lead", "trail ", "x:y", "#hash", "'q'", "\"dq\"", "back\\slash", "tab\t", "ünï", "日本", "-dash",
    "null", "true", "[b]", "{c}", "&*!", "?", "|>", "%", "@at", "line\u{2028}sep", "e=mc2", "- item",
];

fn name(idx: usize) -> impl Strategy<Value = String> {
    (prop::sample::select(FRAGMENTS), prop::option::of(prop::sample::select(FRAGMENTS)))
        .prop_map(move |(a, b)| format!("{a}{idx}{}", b.unwrap_or("")))
}

fn feature_type() -> impl Strategy<Value = FeatureType> {
    prop::sample::select(FeatureType::ALL.to_vec())
}

fn schema() -> impl Strategy<Value = DsdlSchema> {
    (1usize..6, 0usize..3).prop_flat_map(|(nf, nl)| {
        let features: Vec<_> = (0..nf).map(|i| (name(i), feature_type())).collect();
        let labels: Vec<_> = (0..nl).map(|i| (name(100 + i), feature_type())).collect();
        let ids: Vec<_> = (0..3).map(|i| prop::option::of(name(200 + i))).collect();
        (features, labels, ids).prop_map(|(features, labels, ids)| {
            let id = |i: usize| ids[i].clone().map(ColumnRef::new);
            validate_schema(SchemaCandidate {
                features: features.into_iter().map(|(n, t)| FeatureDecl::new(n, t)).collect(),
                user_id: id(0),
                item_id: id(1),
                timestamp: id(2),
                labels: (!labels.is_empty()).then(|| labels.into_iter().map(|(n, t)| LabelDecl::new(n, t)).collect()),
            })
            .expect("generated schema is valid")
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn emitted_schema_parses_back(s in schema()) {
        let text = emit_dsdl(&s);
        let back = parse_dsdl(text.as_bytes());
        prop_assert_eq!(back.as_ref().ok(), Some(&s), "emitted:\n{}\nresult: {:?}", text, back);
    }
}

// ---- preprocessing ----

const PREP_SCHEMA: &str = "DsDL:\n  features:\n    - col_name: x\n      type: numeric\n    - col_name: c\n      type: categorical\n  label:\n    - name: y\n      type: binary\n";

fn csv_of(rows: &[(Option<f64>, Option<u8>, bool)]) -> Vec<u8> {
    let mut out = String::from("x,c,y\n");
    for (x, c, y) in rows {
        let x = x.map(|v| v.to_string()).unwrap_or_default();
        let c = c.map(|v| format!("k{v}")).unwrap_or_default();
        out.push_str(&format!("{x},{c},{}\n", u8::from(*y)));
    }
    out.into_bytes()
}

fn prep_rows() -> impl Strategy<Value = Vec<(Option<f64>, Option<u8>, bool)>> {
    prop::collection::vec(
        (prop::option::weighted(0.85, -50.0..50.0f64), prop::option::weighted(0.9, 0u8..5), any::<bool>()),
        3..80,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn numeric_output_is_standardised_and_one_hot_partitions(rows in prep_rows()) {
        let schema = parse_dsdl(PREP_SCHEMA.as_bytes()).unwrap();
        let data = load_dataset_from_bytes(&csv_of(&rows), &schema, &LoadOptions::default()).unwrap();
        let task = task_compatibility(&schema, TaskKind::Ctr, None).unwrap();
        let Ok(plan) = fit_plan(&data, &task, &PreprocessOptions::default()) else {
            // every feature constant; nothing to check
            return Ok(());
        };
        let m = apply_plan(&plan, &data).unwrap();
        prop_assert_eq!(m.n_rows(), rows.len());
        prop_assert_eq!(m.n_cols(), plan.n_outputs());
        prop_assert!(m.as_slice().iter().all(|v| v.is_finite()));

        let mut col = 0;
        for f in &plan.features {
            let Some(p) = plan.column_plan(&f.column) else { continue };
            match p {
                ColumnPlan::Numeric(_) => {
                    let v = m.column(col);
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    prop_assert!(mean.abs() < 1e-9, "mean {mean}");
                    prop_assert!((var - 1.0).abs() < 1e-9, "variance {var}");
                    col += 1;
                }
                ColumnPlan::OneHot { vocabulary, missing_indicator } => {
                    let w = vocabulary.len() + usize::from(*missing_indicator);
                    for r in 0..m.n_rows() {
                        let block = &m.row(r)[col..col + w];
                        prop_assert!(block.iter().all(|&b| b == 0.0 || b == 1.0));
                        prop_assert_eq!(block.iter().sum::<f64>(), 1.0);
                    }
                    col += w;
                }
                other => prop_assert!(false, "unexpected plan {other:?}"),
            }
        }

        let again = fit_plan(&data, &task, &PreprocessOptions::default()).unwrap();
        prop_assert_eq!(&again, &plan);
        prop_assert_eq!(apply_plan(&again, &data).unwrap(), m);
    }
}
