use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ssp_pac::evi::DEFAULT_EVI_MAX_ITER;
use ssp_pac::mdp::{self, DEFAULT_VI_MAX_ITER, DEFAULT_VI_TOL};
use ssp_pac::sampler::{CountTarget, GenerativeModel};
use ssp_pac::{envs, evi, optimistic_row, ValueVector};
use ssp_pac_bench::{confidence_set, grid, row_inputs};

fn bellman(c: &mut Criterion) {
    let mut group = c.benchmark_group("bellman");
    for side in [4, 8, 16] {
        let m = grid(side);
        let v = ValueVector::zeros(m.num_states());
        group.throughput(Throughput::Elements((m.num_states() * m.num_actions()) as u64));
        group.bench_with_input(BenchmarkId::new("apply", side), &m, |b, m| {
            b.iter(|| mdp::bellman_apply(m, black_box(v.as_slice())))
        });
    }
    let m = grid(8);
    group.bench_function("value_iteration/8", |b| {
        b.iter(|| mdp::value_iteration(black_box(&m), DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER).unwrap())
    });
    group.finish();
}

fn optimistic_rows(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimistic_row");
    for len in [8, 64, 512] {
        let (p, beta, v) = row_inputs(len);
        group.throughput(Throughput::Elements(len as u64 + 1));
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| {
            b.iter(|| optimistic_row(black_box(&p), black_box(&beta), black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn extended_vi(c: &mut Criterion) {
    let mut group = c.benchmark_group("evi");
    let a = envs::fixture_a();
    let set = confidence_set(&a, 1000, 1, 0.1);
    group.bench_function("fixture_a/n1000", |b| {
        b.iter(|| evi(black_box(&set), a.cost(), 0.01, DEFAULT_EVI_MAX_ITER).unwrap())
    });
    let m = grid(5);
    let set = confidence_set(&m, 1000, 1, 0.1);
    group.bench_function("grid5/n1000", |b| {
        b.iter(|| evi(black_box(&set), m.cost(), 0.01, DEFAULT_EVI_MAX_ITER).unwrap())
    });
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampling");
    let m = grid(8);
    let n = 1000;
    group.throughput(Throughput::Elements(n * (m.num_states() * m.num_actions()) as u64));
    group.bench_function("collect/grid8/n1000", |b| {
        b.iter(|| {
            let mut g = GenerativeModel::new(m.clone(), 7);
            g.collect_until(&CountTarget::Uniform(n)).total_samples()
        })
    });
    group.finish();
}

criterion_group!(benches, bellman, optimistic_rows, extended_vi, sampling);
criterion_main!(benches);
