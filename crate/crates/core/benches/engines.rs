//! Parallel vs sequential execution of the hot paths.
//!
//! Without the `parallel` feature both variants run the same sequential code.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use topk::bench::{load_builtin, tic_tac_toe};
use topk::dataset::binarize;
use topk::impurity::score_features;
use topk::learner::{train_topk_with_stats, SearchStats, TrainConfig};
use topk::opt::train_opt_with_stats;
use topk::Impurity;

fn plain_engine(c: &mut Criterion) {
    let data = binarize(&tic_tac_toe(), 100).unwrap().0;
    let mut g = c.benchmark_group("plain_tic_tac_toe_k4_d4");
    g.sample_size(10);
    for parallel in [false, true] {
        let cfg = TrainConfig::new(4, 4, Impurity::Entropy)
            .unwrap()
            .with_parallel(parallel);
        g.bench_with_input(BenchmarkId::from_parameter(parallel), &cfg, |b, cfg| {
            b.iter(|| train_topk_with_stats(&data.view(), black_box(cfg), &SearchStats::default()))
        });
    }
    g.finish();
}

fn opt_engine(c: &mut Criterion) {
    let data = binarize(&tic_tac_toe(), 100).unwrap().0;
    let mut g = c.benchmark_group("opt_tic_tac_toe_k8_d4");
    g.sample_size(10);
    for parallel in [false, true] {
        let cfg = TrainConfig::new(8, 4, Impurity::Entropy)
            .unwrap()
            .with_parallel(parallel);
        g.bench_with_input(BenchmarkId::from_parameter(parallel), &cfg, |b, cfg| {
            b.iter(|| train_opt_with_stats(&data.view(), black_box(cfg), &SearchStats::default()))
        });
    }
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let data = load_builtin("credit").unwrap();
    let mut g = c.benchmark_group("score_1000x1400");
    for parallel in [false, true] {
        g.bench_with_input(BenchmarkId::from_parameter(parallel), &parallel, |b, &p| {
            b.iter(|| score_features(&data.view(), Impurity::Entropy, black_box(p)))
        });
    }
    g.finish();
}

criterion_group!(benches, plain_engine, opt_engine, scoring);
criterion_main!(benches);
