use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use blender_core::endo::MapKind;
use blender_core::exec::{self, Mode};
use blender_core::probes::transitivity_probe;
use blender_core::rigor::{verify_inequality, CertRegion, Predicate};
use blender_core::tangent::{check_cone_invariance, Region};
use blender_core::{Construction, TorusBox};

fn modes() -> [(&'static str, Mode); 2] {
    [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)]
}

fn cone_sampling(c: &mut Criterion) {
    let ctx = Construction::d3();
    let f = ctx.map(MapKind::Singular);
    let mut group = c.benchmark_group("cone_sampling_1e5");
    group.sample_size(10);
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                exec::with_mode(mode, || {
                    check_cone_invariance(&f, &ctx, Region::Torus, ctx.params.kappa, 100_000, 1).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn transitivity(c: &mut Criterion) {
    let ctx = Construction::d3();
    let f = ctx.map(MapKind::Singular);
    let u = TorusBox::cube(&[0.3, -0.2, 0.6], 0.05).unwrap();
    let v = TorusBox::cube(&[-0.5, 0.7, -0.1], 0.05).unwrap();
    let mut group = c.benchmark_group("transitivity_1e4_samples");
    group.sample_size(10);
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| exec::with_mode(mode, || transitivity_probe(&f, &u, &v, 200, 10_000, 3)))
        });
    }
    group.finish();
}

fn certificate(c: &mut Criterion) {
    let ctx = Construction::d3();
    // too tight a cone leaves the transition boxes undecided down to the
    // depth cap, which exercises the leaf-parallel loop
    let pred = Predicate::ConeRatio { kappa: 0.3 };
    let mut group = c.benchmark_group("certificate_depth_10");
    group.sample_size(10);
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| exec::with_mode(mode, || verify_inequality(&ctx, MapKind::Singular, pred, &CertRegion::Transition, 10)))
        });
    }
    group.finish();
}

criterion_group!(benches, cone_sampling, transitivity, certificate);
criterion_main!(benches);
