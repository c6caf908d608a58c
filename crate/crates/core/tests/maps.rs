use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blender_core::endo::{apply_a, perturb, MapKind, PerturbationField, Provenance, TorusMap};
use blender_core::profiles::Zone;
use blender_core::torus::{arc_len, dist_raw, reduce_coord};
use blender_core::{Construction, Error};

fn ctx() -> Arc<Construction> {
    Construction::d3()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    dist_raw(a, b) <= tol
}

#[test]
fn a_examples() {
    let c = ctx();
    assert_eq!(apply_a(&c, &[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
    // 41 · 11/100 = 451/100 = 4 + 51/100
    let y = apply_a(&c, &[0.11, 0.1, 0.2]);
    assert!(close(&y, &[0.51, 0.1, 0.2], 1e-14), "{y:?}");
    for i in 0..40 {
        let x = [reduce_coord(2.0 * i as f64 / 40.0), 0.37, -0.6];
        assert!(close(&apply_a(&c, &x), &x, 1e-13));
    }
}

#[test]
fn fixed_points_of_a() {
    let c = ctx();
    let fx = c.fixed_points_a();
    assert_eq!(fx.len(), 40);
    assert!(fx.contains(&0.0));
    for &ci in &c.params.centers {
        assert!(fx.iter().any(|&x| arc_len(x, ci) < 1e-15), "center {ci}");
    }
}

#[test]
fn slice_index_examples() {
    let c = ctx();
    let p = &c.params;
    for (i, &ci) in p.centers.iter().enumerate() {
        assert_eq!(c.slice_index(&[ci]), (Some(i), Zone::Core));
        assert_eq!(c.slice_index(&[ci + 1.5 * p.r]), (Some(i), Zone::Transition));
    }
    assert_eq!(c.slice_index(&p.p[..p.m]).0, None);
}

#[test]
fn fhat_routes_slices_to_families() {
    let c = ctx();
    let p = &c.params;
    let y = c.apply_fhat(&[p.centers[0], 0.0, 0.0]).unwrap();
    assert!(close(&y[1..], &[0.0, 0.0], 1e-15));
    // slice k+1 carries the translation member of F1
    let x = [p.centers[p.k + 1], 0.1, -0.2];
    let y = c.apply_fhat(&x).unwrap();
    let expect = c.f1.members[0].eval(&x[1..]);
    assert!(close(&y[1..], &expect, 1e-15));
    assert!(matches!(c.apply_fhat(&p.p), Err(Error::OutsideDomain)));
}

#[test]
fn blended_map_interpolates_a_and_fhat() {
    let c = ctx();
    let p = &c.params;
    let f = c.map(MapKind::Blended);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let y: Vec<f64> = (0..p.k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = vec![rng.gen_range(-1.0..1.0)];
        x.extend(&y);
        if c.slice_index(&x[..1]).0.is_none() {
            assert_eq!(f.eval(&x), apply_a(&c, &x));
        }
        let i = rng.gen_range(0..p.centers.len());
        x[0] = p.centers[i] + rng.gen_range(-p.r..p.r);
        assert!(close(&f.eval(&x), &c.apply_fhat(&x).unwrap(), 1e-15));
    }
    assert!(close(&f.eval(&p.saddle()), &p.saddle(), 1e-15));
}

#[test]
fn singular_map_examples() {
    let c = ctx();
    let p = &c.params;
    let f = c.map(MapKind::Blended);
    let big_f = c.map(MapKind::Singular);
    assert_eq!(big_f.provenance(), Provenance::Singular);
    // φ(1/4) = 0, so p is moved exactly as A moves it
    assert!(close(&big_f.eval(&p.p), &apply_a(&c, &p.p), 1e-15));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (lo, hi) = c.phi.support();
    let mut x = vec![0.0; p.n];
    for _ in 0..100_000 {
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let off_support = dist_raw(&x, &p.p) >= p.l
            || x[p.n - 1] <= lo
            || x[p.n - 1] >= hi
            || dist_raw(&x[..p.n - 1], &p.p[..p.n - 1]) >= c.cutoff.outer;
        if off_support {
            assert_eq!(big_f.eval(&x), f.eval(&x));
        }
    }
}

#[test]
fn singular_map_is_continuous_across_the_ball_boundary() {
    let c = ctx();
    let p = &c.params;
    let big_f = c.map(MapKind::Singular);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let dir: Vec<f64> = (0..p.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let at = |rad: f64| -> Vec<f64> { p.p.iter().zip(&dir).map(|(&q, &d)| q + rad * d / norm).collect() };
        let jump = dist_raw(&big_f.eval(&at(p.l * (1.0 - 1e-12))), &big_f.eval(&at(p.l * (1.0 + 1e-12))));
        worst = worst.max(jump);
    }
    assert!(worst < 1e-9, "max jump {worst}");
}

#[test]
fn determinant_identity_in_the_ball() {
    let c = ctx();
    let p = &c.params;
    let big_f = c.map(MapKind::Singular);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut g = vec![0.0; p.n - 1];
    let lm = p.lambda_pow_m();
    for s in 0..100_000 {
        let mut x: Vec<f64> = p.p.iter().map(|&q| q + rng.gen_range(-p.l..p.l)).collect();
        if s % 2 == 0 {
            // half the samples in the thin slab where the fold happens
            x[p.n - 1] = 0.25 + rng.gen_range(-p.delta..p.delta);
        }
        if dist_raw(&x, &p.p) >= p.l {
            continue;
        }
        let fold = big_f.surgery_terms(&x, &mut g).map_or(0.0, |t| t.fold());
        let expect = lm * (1.0 - fold);
        let det = big_f.jacobian(&x).determinant();
        assert!((det - expect).abs() <= 1e-9 * expect.abs().max(lm), "{x:?}: {det} vs {expect}");
        if s % 10 == 0 {
            let d = blender_core::singular::det_f(&c, &x).unwrap();
            assert!((d - det).abs() <= 1e-9 * det.abs().max(1.0));
        }
    }
}

#[test]
fn evaluation_commutes_with_reduction() {
    let c = ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [MapKind::Linear, MapKind::Fhat, MapKind::Blended, MapKind::Singular] {
        let f = c.map(kind);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lift: Vec<f64> = x.iter().map(|&v| v + 2.0 * rng.gen_range(-3i32..=3) as f64).collect();
            assert!(close(&f.eval(&lift), &f.eval(&x), 1e-12), "{kind:?}");
        }
    }
}

#[test]
fn slices_cover_the_torus() {
    // images of a 64^n grid in each K_i × T^k hit every cell of an 8^n grid
    let c = ctx();
    let p = &c.params;
    let f = c.map(MapKind::Blended);
    let g = 64;
    for &ci in &p.centers {
        let mut hit = vec![false; 8usize.pow(p.n as u32)];
        for a in 0..g {
            for b in 0..g {
                for d in 0..g {
                    let x = [
                        ci - p.r + 2.0 * p.r * (a as f64 + 0.5) / g as f64,
                        -1.0 + 2.0 * (b as f64 + 0.5) / g as f64,
                        -1.0 + 2.0 * (d as f64 + 0.5) / g as f64,
                    ];
                    let y = f.eval(&x);
                    let cell = y.iter().fold(0, |acc, &v| acc * 8 + (((v + 1.0) * 4.0) as usize).min(7));
                    hit[cell] = true;
                }
            }
        }
        assert!(hit.iter().all(|&h| h), "slice at {ci}");
    }
}

#[test]
fn slice_tori_are_invariant_and_the_saddle_manifolds_anchor() {
    let c = ctx();
    let p = &c.params;
    let f = c.map(MapKind::Blended);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let ci = p.centers[rng.gen_range(0..p.centers.len())];
        let x = [ci, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        assert!(arc_len(f.eval(&x)[0], ci) < 1e-13);
        // unstable segment through the saddle: stretched by λ, central block kept
        let t = rng.gen_range(-p.r..p.r);
        let y = f.eval(&[t, -1.0, -1.0]);
        assert!(arc_len(y[0], p.lambda_f() * t) < 1e-13);
        assert_eq!(&y[1..], &[-1.0, -1.0]);
        // stable disc maps into itself
        let z = [0.0, -1.0 + rng.gen_range(-p.r..p.r), -1.0 + rng.gen_range(-p.r..p.r)];
        let w = f.eval(&z);
        assert_eq!(w[0], 0.0);
        for j in 1..3 {
            assert!(arc_len(w[j], -1.0) <= arc_len(z[j], -1.0));
        }
    }
}

#[test]
fn perturbation_sizes_measured_on_a_grid() {
    let c = ctx();
    let base = c.map(MapKind::Singular);
    for (seed, eps) in [(1u64, 1e-3), (2, 0.4)] {
        let field = PerturbationField::random(3, eps, 2, seed);
        let g = perturb(base.clone(), field);
        assert_eq!(g.provenance(), Provenance::Perturbed);
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        let side = 22; // 22^3 > 10^4
        for a in 0..side {
            for b in 0..side {
                for d in 0..side {
                    let x: Vec<f64> = [a, b, d].iter().map(|&i| -1.0 + 2.0 * (i as f64 + 0.5) / side as f64).collect();
                    c0 = c0.max(dist_raw(&g.eval(&x), &base.eval(&x)));
                    let diff = g.jacobian(&x) - base.jacobian(&x);
                    c1 = c1.max(diff.svd(false, false).singular_values.max());
                }
            }
        }
        assert!(c0 <= eps && c1 <= eps, "eps {eps}: C0 {c0}, C1 {c1}");
        assert!(c0 > 0.0);
    }
    let same = perturb(base.clone(), PerturbationField::zero(3));
    let x = [0.3, -0.2, 0.7];
    assert_eq!(same.eval(&x), base.eval(&x));
    assert_eq!(same.jacobian(&x), base.jacobian(&x));
}
