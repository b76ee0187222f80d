use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use twinet::bench::evaluate_instance;
use twinet::parallel;
use twinet::randgen::gen_rnet;

fn batch_widths(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..16).collect();
    let eval = |&seed: &u64| evaluate_instance(&gen_rnet(30, 4, seed), 10, false).unwrap();
    let mut group = c.benchmark_group("batch_widths");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| black_box(parallel::map_sequential(&seeds, eval))));
    group.bench_function("parallel", |b| b.iter(|| black_box(parallel::map(&seeds, 0, eval))));
    group.finish();
}

criterion_group!(benches, batch_widths);
criterion_main!(benches);
