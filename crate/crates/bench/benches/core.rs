use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hypokernel::{apply_pt, extend_k, frac_a, gramian_k, hormander_kernel, KernelForm, QuadratureConfig};
use hypokernel_bench::{kolmogorov, space_time_gaussian, unit_gaussian};

fn gramians(c: &mut Criterion) {
    let mut group = c.benchmark_group("gramian_k");
    for n in [1, 2, 3] {
        let model = kolmogorov(n);
        group.bench_with_input(BenchmarkId::from_parameter(2 * n), &model, |b, m| {
            b.iter(|| gramian_k(m, black_box(0.7)).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let model = kolmogorov(1);
    c.bench_function("hormander_kernel_k_form", |b| {
        b.iter(|| hormander_kernel(&model, black_box(&[0.1, 0.2]), &[0.3, -0.1], 0.5, KernelForm::K).unwrap())
    });
}

fn semigroup(c: &mut Criterion) {
    let quad = QuadratureConfig::default();
    let mut group = c.benchmark_group("apply_pt");
    for n in [1, 2] {
        let model = kolmogorov(n);
        let f = unit_gaussian(2 * n);
        let x = vec![0.2; 2 * n];
        group.bench_with_input(BenchmarkId::from_parameter(2 * n), &n, |b, _| {
            b.iter(|| apply_pt(&f, &model, black_box(&x), 0.5, &quad).unwrap())
        });
    }
    group.finish();
}

fn fractional(c: &mut Criterion) {
    let quad = QuadratureConfig::default();
    let model = kolmogorov(1);
    let f = unit_gaussian(2);
    let mut group = c.benchmark_group("frac_a");
    group.sample_size(20);
    for s in [0.25, 0.5, 0.75] {
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            b.iter(|| frac_a(&f, &model, black_box(&[0.3, -0.2]), s, &quad).unwrap())
        });
    }
    group.finish();
}

fn extension(c: &mut Criterion) {
    let quad = QuadratureConfig::default();
    let model = kolmogorov(1);
    let u = space_time_gaussian(2);
    let mut group = c.benchmark_group("extend_k");
    group.sample_size(20);
    group.bench_function("z0.1", |b| {
        b.iter(|| extend_k(&u, &model, black_box(&[0.3, -0.2]), 0.1, 0.1, 0.0, &quad).unwrap())
    });
    group.finish();
}

criterion_group!(benches, gramians, kernel, semigroup, fractional, extension);
criterion_main!(benches);
