use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nlbox_core::{
    bootstrap_chsh, grid_search, planar_frame, sample_counts, singlet_box, xor_wire, CondProbTable,
    EtaGammaParams, PlanarAngle, Visibility,
};

fn optimal_box() -> CondProbTable {
    let phi = PlanarAngle::from_degrees(15.95).unwrap();
    singlet_box(&planar_frame(phi).unwrap(), Visibility::PERFECT).unwrap()
}

fn boxes(c: &mut Criterion) {
    let p = optimal_box();
    let q = CondProbTable::from_eta_gamma(EtaGammaParams::new(0.03, 0.2).unwrap());
    c.bench_function("chsh", |b| b.iter(|| black_box(&p).chsh().unwrap()));
    c.bench_function("xor_wire", |b| {
        b.iter(|| xor_wire(black_box(&p), black_box(&q)).unwrap())
    });
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    g.bench_function("grid_search_500", |b| {
        b.iter(|| grid_search(black_box(500), 1e-9).unwrap())
    });
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let p = optimal_box();
    c.bench_function("sample_counts_1e6", |b| {
        b.iter(|| sample_counts(black_box(&p), 1_000_000, 7).unwrap())
    });
    let counts = sample_counts(&p, 10_000, 7).unwrap();
    let mut g = c.benchmark_group("bootstrap");
    g.sample_size(10);
    g.bench_function("bootstrap_1000", |b| {
        b.iter(|| bootstrap_chsh(black_box(&counts), 1000, 3).unwrap())
    });
    g.finish();
}

criterion_group!(benches, boxes, search, sampling);
criterion_main!(benches);
