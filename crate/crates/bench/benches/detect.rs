//! Detection benchmarks: corpus synthesis, model training, single-record
//! scoring latency, and ranking-metric cost at evaluation scale.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cyberdef_core::detect::{predict, train, TrainConfig, TrainedModel};
use cyberdef_core::flows::{self, Dataset, SynthSpec};
use cyberdef_core::metrics;

fn corpus(rows: usize, seed: u64) -> Dataset {
    flows::synthesize(&SynthSpec {
        rows,
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn model_for(data: &Dataset) -> TrainedModel {
    train(data, &TrainConfig::default(), 42).unwrap()
}

fn synthesize_corpus(c: &mut Criterion) {
    let spec = SynthSpec {
        rows: 10_000,
        seed: 1,
        ..SynthSpec::default()
    };
    c.bench_function("synthesize/10k-rows", |b| {
        b.iter(|| flows::synthesize(black_box(&spec)).unwrap())
    });
}

/// Full training: preprocessing fit, tree growth, and the k-NN validation
/// comparison. Dominated by k-NN's pairwise distances, so samples are few.
fn train_model(c: &mut Criterion) {
    let data = corpus(5_000, 2);
    let config = TrainConfig::default();
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("5k-rows", |b| {
        b.iter(|| train(black_box(&data), black_box(&config), 42).unwrap())
    });
    group.finish();
}

/// Per-record scoring latency, cycling through varied records so one tree
/// path does not dominate.
fn predict_single(c: &mut Criterion) {
    let data = corpus(2_000, 3);
    let model = model_for(&data);
    let records = &data.records[..64];
    c.bench_function("predict/single-record", |b| {
        let mut i = 0;
        b.iter(|| {
            let r = &records[i % records.len()];
            i += 1;
            predict(black_box(&model), black_box(r)).unwrap()
        })
    });
}

/// Macro-averaged ROC AUC over a full evaluation-sized score matrix (the
/// rank-sum sort is the dominant cost of an evaluation report).
fn ranking_metrics(c: &mut Criterion) {
    let data = corpus(10_000, 4);
    let model = model_for(&data);
    let mut scores = Vec::with_capacity(data.records.len());
    let mut truths = Vec::with_capacity(data.records.len());
    for r in &data.records {
        let p = predict(&model, r).unwrap();
        scores.push(p.scores);
        truths.push(r.label.clone().unwrap());
    }
    let classes = model.class_order.clone();
    c.bench_function("roc_auc/10k-rows", |b| {
        b.iter(|| {
            metrics::roc_auc(black_box(&classes), black_box(&scores), black_box(&truths)).unwrap()
        })
    });
}

criterion_group!(
    benches,
    synthesize_corpus,
    train_model,
    predict_single,
    ranking_metrics
);
criterion_main!(benches);
