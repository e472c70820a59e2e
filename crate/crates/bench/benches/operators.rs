use std::hint::black_box;
use std::sync::Arc;

use axiswim_bench::{central_configuration, stick_donut, three_sphere};
use axiswim_core::bem::ring_stokeslet;
use axiswim_core::geometry::sphere;
use axiswim_core::{assemble, complete_k, ReducedModel, ShapeFamily};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn kernels(c: &mut Criterion) {
    c.bench_function("complete_k", |b| b.iter(|| complete_k(black_box(0.987)).unwrap()));
    c.bench_function("ring_stokeslet", |b| b.iter(|| ring_stokeslet(black_box([0.01, 0.2]), black_box([0.0, 0.21])).unwrap()));
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    group.sample_size(10);
    for n in [10, 15, 30] {
        let curve = sphere(0.05, 0.0, n).unwrap();
        group.bench_with_input(BenchmarkId::new("sphere", n), &curve, |b, curve| b.iter(|| assemble(curve, 1.0).unwrap()));
    }
    let families: [Arc<dyn ShapeFamily>; 2] = [Arc::new(three_sphere()), Arc::new(stick_donut())];
    for family in &families {
        let cfg = central_configuration(family.as_ref());
        group.bench_function(family.name(), |b| b.iter(|| assemble(&cfg.curve, 1.0).unwrap()));
    }
    group.finish();
}

fn reduced(c: &mut Criterion) {
    let families: [Arc<dyn ShapeFamily>; 2] = [Arc::new(three_sphere()), Arc::new(stick_donut())];
    let mut group = c.benchmark_group("reduced_coefficients");
    group.sample_size(10);
    for family in families {
        let (lo, hi) = family.bounds();
        let xi: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
        // a fresh model per sample so no operator block is reused
        group.bench_function(family.name(), |b| b.iter(|| ReducedModel::new(family.clone(), 1.0).compute(&xi).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernels, assembly, reduced);
criterion_main!(benches);
