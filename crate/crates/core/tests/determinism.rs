//! Sequential and parallel runs must agree bit for bit.

use blender_core::exec::{with_mode, Mode};
use blender_core::probes::{grid_coverage, robustness_sweep, transitivity_probe, ProbeSpec, DEFAULT_CELL_BUDGET};
use blender_core::rigor::{sampling_cross_check, verify_inequality, CertRegion, Predicate};
use blender_core::tangent::{check_cone_invariance, check_expansion, Region};
use blender_core::{Construction, MapKind, TorusBox};

fn both<T: PartialEq + std::fmt::Debug>(f: impl Fn() -> T) -> T {
    let a = with_mode(Mode::Sequential, &f);
    let b = with_mode(Mode::Parallel, &f);
    assert_eq!(a, b);
    a
}

#[test]
fn cone_and_expansion_sweeps() {
    let ctx = Construction::d3();
    let f = ctx.map(MapKind::Singular);
    for region in [Region::Torus, Region::Transition, Region::Ball] {
        both(|| check_cone_invariance(&f, &ctx, region, 1.0, 20_000, 7).unwrap());
        both(|| check_expansion(&f, &ctx, region, 20_000, 7, 1.0));
    }
}

#[test]
fn transitivity_and_coverage() {
    let ctx = Construction::d3();
    let f = ctx.map(MapKind::Singular);
    let u = TorusBox::cube(&[0.5, -0.3, 0.1], 0.05).unwrap();
    let v = TorusBox::cube(&[-0.2, 0.6, 0.8], 0.05).unwrap();
    let rep = both(|| transitivity_probe(&f, &u, &v, 200, 2000, 3));
    assert!(rep.replay(&f));
    both(|| grid_coverage(&f, &[0.1, 0.2, 0.3], 50_000, 16, DEFAULT_CELL_BUDGET).unwrap());
}

#[test]
fn robustness_sweep_is_mode_independent() {
    let ctx = Construction::d3();
    let f = ctx.map(MapKind::Singular);
    let probe = ProbeSpec::Coverage { steps: 20_000, resolution: 8, threshold: 0.9 };
    both(|| robustness_sweep(&f, 1e-3, 4, &probe, 11).unwrap());
}

#[test]
fn certificates_are_mode_independent() {
    let ctx = Construction::d3();
    let text = both(|| {
        verify_inequality(&ctx, MapKind::Singular, Predicate::ConeRatio { kappa: 0.3 }, &CertRegion::Transition, 6)
            .to_text()
    });
    assert!(text.contains("verdict"));
    both(|| {
        sampling_cross_check(&ctx, MapKind::Blended, Predicate::ConeRatio { kappa: 1.0 }, &CertRegion::Torus, 5000, 2)
    });
}
