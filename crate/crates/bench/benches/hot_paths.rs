use criterion::{black_box, criterion_group, criterion_main, Criterion};
use dares_core::ingest::{load_dataset_from_bytes, LoadOptions};
use dares_core::metrics::auc_roc;
use dares_core::models::{train_item_knn, Assignment, ItemKnnParams};
use dares_core::preprocess::{apply_plan, fit_plan, PreprocessOptions};
use dares_core::{parse_dsdl, task_compatibility, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCHEMA: &str = "DsDL:
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

fn table(rows: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut out = String::from(
        "usr_id,product_id,ts,age,is_subscriber,product_cat,product_desc,product_price,product_satisfaction_level,product_image,purchase_decision\n",
    );
    for n in 0..rows {
        out.push_str(&format!(
            "u{},p{},{},{},{},c{},word{} word{},{:.2},{},http://x/{n},{}\n",
            rng.random_range(0..500),
            rng.random_range(0..800),
            1_700_000_000 + n,
            rng.random_range(18..80),
            if rng.random_bool(0.5) { "yes" } else { "no" },
            rng.random_range(0..12),
            rng.random_range(0..50),
            rng.random_range(0..50),
            rng.random_range(1.0..200.0),
            rng.random_range(1..6),
            u8::from(rng.random_bool(0.3)),
        ));
    }
    out
}

fn bench_parse(c: &mut Criterion) {
    c.bench_function("parse_dsdl/reference", |b| b.iter(|| parse_dsdl(black_box(SCHEMA.as_bytes())).unwrap()));
}

fn bench_auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<f64> = (0..100_000).map(|_| f64::from(u8::from(rng.random_bool(0.2)))).collect();
    let s: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
    c.bench_function("auc_roc/100k", |b| b.iter(|| auc_roc(black_box(&y), black_box(&s)).unwrap()));
}

fn bench_preprocess(c: &mut Criterion) {
    let schema = parse_dsdl(SCHEMA.as_bytes()).unwrap();
    let data = load_dataset_from_bytes(table(10_000).as_bytes(), &schema, &LoadOptions::default()).unwrap();
    let task = task_compatibility(&schema, TaskKind::Ctr, None).unwrap();
    let options = PreprocessOptions { hash_dim: 256, ..PreprocessOptions::default() };
    let plan = fit_plan(&data, &task, &options).unwrap();
    c.bench_function("fit_plan/10k", |b| b.iter(|| fit_plan(black_box(&data), &task, &options).unwrap()));
    c.bench_function("apply_plan/10k", |b| b.iter(|| apply_plan(black_box(&plan), &data).unwrap()));
}

fn bench_knn(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<(String, String)> = (0..20_000)
        .map(|_| (format!("u{}", rng.random_range(0..1000)), format!("i{}", rng.random_range(0..400))))
        .collect();
    c.bench_function("item_knn/train_20k", |b| {
        b.iter(|| train_item_knn(black_box(&pairs), &ItemKnnParams::default(), Assignment::default()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_parse, bench_auc, bench_preprocess, bench_knn
}
criterion_main!(benches);
