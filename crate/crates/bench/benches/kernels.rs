use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ttmc_bench::{overflow, overflow_operator, random_tensor};
use ttmc_core::amen::{amen_stationary, AmenConfig};
use ttmc_core::multigrid::{build_hierarchy, multigrid_solve, tt_gmres_smooth, CoarseSolver, MGConfig};
use ttmc_core::TruncationPolicy;

fn tensor_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("tensor");
    for rank in [5, 10, 20] {
        let x = random_tensor(&[17; 6], rank, 1);
        let y = random_tensor(&[17; 6], rank, 2);
        group.bench_with_input(BenchmarkId::new("inner", rank), &rank, |b, _| b.iter(|| x.inner(black_box(&y))));
        group.bench_with_input(BenchmarkId::new("orthogonalize", rank), &rank, |b, _| {
            b.iter(|| black_box(&x).orthogonalize(0))
        });
        let sum = x.add(&y).unwrap();
        let policy = TruncationPolicy::relative(1e-8, rank);
        group.bench_with_input(BenchmarkId::new("truncate_sum", rank), &rank, |b, _| {
            b.iter(|| black_box(&sum).truncate(&policy))
        });
    }
    group.finish();
}

fn operator_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    let a = overflow_operator(6, 16);
    for rank in [5, 10, 20] {
        let x = random_tensor(&[17; 6], rank, 3);
        group.bench_with_input(BenchmarkId::new("apply", rank), &rank, |b, _| b.iter(|| a.apply(black_box(&x))));
    }
    let model = overflow(6, 16);
    group.bench_function("hierarchy", |b| b.iter(|| build_hierarchy(black_box(&model))));
    let x = random_tensor(&[17; 6], 5, 4);
    let zero = x.scale(0.0);
    let policy = TruncationPolicy::relative(1e-2, 20);
    group.bench_function("gmres_smooth_3", |b| b.iter(|| tt_gmres_smooth(&a, black_box(&zero), &x, 3, &policy)));
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    let a = overflow_operator(4, 8);
    group.bench_function("amen_overflow_d4_n9", |b| b.iter(|| amen_stationary(&a, 2.0, &AmenConfig::default())));
    let model = overflow(4, 16);
    for cfg in [MGConfig::default(), MGConfig::with_coarse(CoarseSolver::Amen)] {
        group.bench_function(format!("{}_overflow_d4_n17", cfg.method_name()), |b| {
            b.iter(|| multigrid_solve(black_box(&model), &cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, tensor_kernels, operator_kernels, solvers);
criterion_main!(benches);
