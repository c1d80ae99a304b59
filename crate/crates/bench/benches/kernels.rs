use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use solvflow_core::flow::{bracket_rhs, integrate, FlowKind, FlowSpec};
use solvflow_core::geometry::{mu_of_a, riemann_tensor};
use solvflow_core::{eigenvalues, Mat};

fn sample(n: usize) -> Mat {
    Mat::from_fn(n, |i, j| ((3 * i + 5 * j) % 7) as f64 / 7.0 - 0.4)
}

fn kernels(c: &mut Criterion) {
    let a8 = sample(8);
    c.bench_function("eigenvalues_8x8", |b| b.iter(|| eigenvalues(black_box(&a8)).unwrap()));
    c.bench_function("bracket_rhs_8x8", |b| b.iter(|| bracket_rhs(black_box(&a8))));
    let g = mu_of_a(&sample(5));
    c.bench_function("riemann_tensor_dim6", |b| b.iter(|| riemann_tensor(black_box(&g))));
    let spec = FlowSpec::new(FlowKind::Bracket, sample(4), 10.0);
    c.bench_function("integrate_bracket_4x4_t10", |b| b.iter(|| integrate(black_box(&spec)).unwrap()));
}

criterion_group!(benches, kernels);
criterion_main!(benches);
