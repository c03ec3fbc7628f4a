use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use kcl_bench::fixtures;
use kcl_core::constructor::{build_profile_ode, build_profile_quadrature, solve_radius};
use kcl_core::expr;
use kcl_core::verifier::curvature_residual;
use kcl_core::{QuadratureConfig, StepControl, Variant};

fn radius(c: &mut Criterion) {
    let q = QuadratureConfig::default();
    let mut group = c.benchmark_group("solve_radius");
    for (name, m) in fixtures() {
        group.bench_function(name, |b| b.iter(|| solve_radius(&m, black_box(-1.0), 2.0, &q).unwrap()));
    }
    group.finish();
}

fn builders(c: &mut Criterion) {
    let q = QuadratureConfig::default();
    let ctl = StepControl::default();
    let mut group = c.benchmark_group("build");
    group.sample_size(20);
    for (name, m) in fixtures() {
        group.bench_function(format!("quadrature/{name}"), |b| {
            b.iter(|| build_profile_quadrature(&m, -1.0, Variant::Weighted, 257, &q).unwrap())
        });
        group.bench_function(format!("ode/{name}"), |b| {
            b.iter(|| build_profile_ode(&m, -1.0, Variant::Weighted, 257, &ctl, &q).unwrap())
        });
    }
    group.finish();
}

fn residual(c: &mut Criterion) {
    let q = QuadratureConfig::default();
    let (_, m) = fixtures().remove(1);
    let sol = build_profile_quadrature(&m, -1.0, Variant::Unweighted, 257, &q).unwrap();
    c.bench_function("curvature_residual/hyperbolic2", |b| b.iter(|| curvature_residual(black_box(&sol)).unwrap()));
}

fn expressions(c: &mut Criterion) {
    let ast = expr::parse("sinh(2*r)/2 + log(1 + r^2) * exp(-r)").unwrap();
    let params = BTreeMap::new();
    c.bench_function("expr/eval", |b| b.iter(|| ast.eval(black_box(0.7), &params).unwrap()));
}

criterion_group!(benches, radius, builders, residual, expressions);
criterion_main!(benches);
