//! Jacobians, the unstable cone field and the hyperbolicity checks.
//!
//! The cone of parameter `a` at any point is
//! `{v : ‖v_c‖ < a ‖v_u‖}`, where `v_u` is the first `m` (unstable)
//! coordinates and `v_c` the last `k` (central) ones.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::endo::{Construction, MapKind, TorusMap};
use crate::error::{Error, Result};
use crate::exec;
use crate::profiles::Zone;
use crate::torus::{arc_diff, arc_len, dist_raw, reduce_coord, TangentVector};

/// Central-difference Jacobian with toral lifting of the image differences.
pub fn jacobian_fd<M: TorusMap + ?Sized>(map: &M, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::OutOfRange(format!("step h = {h} must be positive")));
    }
    if h < 1e-12 {
        return Err(Error::OutOfRange(format!("step h = {h} is below 1e-12 and ill-conditioned")));
    }
    let n = map.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for j in 0..n {
        xp[j] = x[j] + h;
        map.eval_into(&xp, &mut plus);
        xp[j] = x[j] - h;
        map.eval_into(&xp, &mut minus);
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = arc_diff(minus[i], plus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `max |a - b| / max(max |a|, 1)`.
pub fn jacobian_rel_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    let diff = (analytic - numeric).amax();
    diff / analytic.amax().max(1.0)
}

/// `‖v_c‖ / ‖v_u‖` for raw components.
pub fn cone_ratio_raw(v: &[f64], m: usize) -> f64 {
    let u: f64 = v[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
    let c: f64 = v[m..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if u == 0.0 {
        f64::INFINITY
    } else {
        c / u
    }
}

pub fn cone_ratio(v: &TangentVector) -> Result<f64> {
    if v.components().iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(cone_ratio_raw(v.components(), v.m()))
}

/// Where sample points are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Uniform on `T^n`.
    Torus,
    /// `K~ × T^k`.
    BlendZone,
    /// `(K~ \ K) × T^k`, where `∇U ≠ 0` is possible.
    Transition,
    /// The toral ball `B(p, l)`.
    Ball,
    /// Where the surgery correction is active: the `ψ`-annulus, the `φ`-slab
    /// and the cutoff disk.
    Surgery,
    /// The complement of `K~ × T^k` and of `B(p, l)`.
    Complement,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Torus => "torus",
            Region::BlendZone => "blend-zone",
            Region::Transition => "transition",
            Region::Ball => "ball",
            Region::Surgery => "surgery",
            Region::Complement => "complement",
        }
    }
}

impl std::str::FromStr for Region {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Region::Torus,
            Region::BlendZone,
            Region::Transition,
            Region::Ball,
            Region::Surgery,
            Region::Complement,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown region `{s}`"))
    }
}

fn uniform(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = rng.gen_range(-1.0..1.0);
    }
}

/// Draws one point of `region`.
pub fn sample_point(ctx: &Construction, region: Region, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let p = &ctx.params;
    let (n, m) = (p.n, p.m);
    match region {
        Region::Torus => uniform(rng, out),
        Region::BlendZone | Region::Transition => loop {
            uniform(rng, out);
            let c = p.centers[rng.gen_range(0..p.centers.len())];
            for v in &mut out[..m] {
                *v = reduce_coord(c + rng.gen_range(-2.0 * p.r..2.0 * p.r));
            }
            if region == Region::BlendZone || ctx.layout.locate(&out[..m]).1 == Zone::Transition {
                return;
            }
        },
        Region::Ball => loop {
            for j in 0..n {
                out[j] = reduce_coord(p.p[j] + rng.gen_range(-p.l..p.l));
            }
            if dist_raw(out, &p.p) < p.l {
                return;
            }
        },
        Region::Surgery => {
            let (lo, hi) = ctx.phi.support();
            let rho_max = ctx.cutoff.outer;
            loop {
                for j in 0..n - 1 {
                    out[j] = p.p[j] + rng.gen_range(-rho_max..rho_max);
                }
                let s: f64 = out[..n - 1].iter().map(|v| v * v).sum();
                let d2: f64 = out[..n - 1].iter().zip(&p.p).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < rho_max * rho_max && (s - crate::profiles::PSI_PEAK).abs() < p.theta {
                    out[n - 1] = rng.gen_range(lo..hi);
                    for v in out.iter_mut() {
                        *v = reduce_coord(*v);
                    }
                    return;
                }
            }
        }
        Region::Complement => loop {
            uniform(rng, out);
            if ctx.layout.locate(&out[..m]).0.is_none() && dist_raw(out, &p.p) >= p.l {
                return;
            }
        },
    }
}

/// Unit-free cone vector: `v_u` uniform on the unit sphere of `R^m` and `v_c`
/// uniform on the sphere of radius `ratio` in `R^k`.
pub fn sample_cone_vector(rng: &mut ChaCha8Rng, m: usize, n: usize, ratio: f64, out: &mut [f64]) {
    let mut sphere = |block: &mut [f64], radius: f64| loop {
        for v in block.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            block.iter_mut().for_each(|v| *v *= radius / norm);
            return;
        }
    };
    let (u, c) = out[..n].split_at_mut(m);
    sphere(u, 1.0);
    sphere(c, ratio);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub region: Region,
    pub kappa: f64,
    pub samples: usize,
    pub max_ratio: f64,
    pub worst_point: Vec<f64>,
    pub worst_vector: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub region: Region,
    pub samples: usize,
    pub threshold: f64,
    pub min_factor: f64,
    /// `λ / √(1 + κ²)`.
    pub analytic_floor: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

/// Samples `(point, boundary cone vector)` pairs and records the largest cone
/// ratio of the image. With `interior` set, the central norm is drawn
/// uniformly in `[0, κ]` instead of sitting on the boundary.
pub fn check_cone_invariance_with<M: TorusMap + ?Sized>(
    map: &M,
    ctx: &Construction,
    region: Region,
    kappa: f64,
    samples: usize,
    seed: u64,
    interior: bool,
) -> Result<ConeReport> {
    if !(kappa > 0.0 && kappa < 3.0) {
        return Err(Error::OutOfRange(format!("κ = {kappa} not in (0, 3)")));
    }
    let n = map.dim();
    let m = ctx.params.m;
    let chunks = exec::sweep(samples, seed, |range, rng| {
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut jac = DMatrix::zeros(n, n);
        let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
        for _ in range {
            sample_point(ctx, region, rng, &mut x);
            let ratio = if interior { rng.gen_range(0.0..=kappa) } else { kappa };
            sample_cone_vector(rng, m, n, ratio, &mut v);
            map.jacobian_into(&x, &mut jac);
            let image = &jac * nalgebra::DVector::from_column_slice(&v);
            let r = cone_ratio_raw(image.as_slice(), m);
            if r > best.0 {
                best = (r, x.clone(), v.clone());
            }
        }
        best
    });
    let (max_ratio, worst_point, worst_vector) = chunks
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new(), Vec::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(ConeReport { region, kappa, samples, max_ratio, worst_point, worst_vector, pass: max_ratio < kappa })
}

/// Boundary-ray version of [`check_cone_invariance_with`].
pub fn check_cone_invariance<M: TorusMap + ?Sized>(
    map: &M,
    ctx: &Construction,
    region: Region,
    kappa: f64,
    samples: usize,
    seed: u64,
) -> Result<ConeReport> {
    check_cone_invariance_with(map, ctx, region, kappa, samples, seed, false)
}

/// Smallest `‖Jv‖/‖v‖` over sampled cone vectors (central ratio uniform in
/// `[0, κ]`, boundary included with positive probability via the endpoint).
pub fn check_expansion<M: TorusMap + ?Sized>(
    map: &M,
    ctx: &Construction,
    region: Region,
    samples: usize,
    seed: u64,
    threshold: f64,
) -> ExpansionReport {
    let n = map.dim();
    let m = ctx.params.m;
    let kappa = ctx.params.kappa;
    let chunks = exec::sweep(samples, seed, |range, rng| {
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut jac = DMatrix::zeros(n, n);
        let mut best = (f64::INFINITY, Vec::new());
        for s in range {
            sample_point(ctx, region, rng, &mut x);
            // every other sample sits exactly on the boundary ray
            let ratio = if s % 2 == 0 { kappa } else { rng.gen_range(0.0..=kappa) };
            sample_cone_vector(rng, m, n, ratio, &mut v);
            map.jacobian_into(&x, &mut jac);
            let dv = nalgebra::DVector::from_column_slice(&v);
            let factor = (&jac * &dv).norm() / dv.norm();
            if factor < best.0 {
                best = (factor, x.clone());
            }
        }
        best
    });
    let (min_factor, worst_point) =
        chunks.into_iter().fold((f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a });
    ExpansionReport {
        region,
        samples,
        threshold,
        min_factor,
        analytic_floor: ctx.params.lambda_f() / (1.0 + kappa * kappa).sqrt(),
        worst_point,
        pass: min_factor > threshold,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NhReport {
    pub slice: usize,
    pub samples: usize,
    /// `‖(Df|E^u)^{-1}‖`.
    pub inverse_unstable_norm: f64,
    /// Largest `‖(Df|E^u)^{-1}‖ · ‖Df|TN‖` seen.
    pub max_domination: f64,
    /// Largest deviation of the image's unstable block from `c_i`.
    pub invariance_error: f64,
    pub pass: bool,
}

/// Normal hyperbolicity of the invariant torus `{c_i} × T^k` under `f`.
pub fn nh_inequalities_probe(ctx: &std::sync::Arc<Construction>, slice: usize, samples: usize, seed: u64) -> Result<NhReport> {
    let p = &ctx.params;
    if slice >= p.centers.len() {
        return Err(Error::OutOfRange(format!("slice {slice} not in 0..{}", p.centers.len())));
    }
    let map = ctx.map(MapKind::Blended);
    let (n, m) = (p.n, p.m);
    let c = p.centers[slice];
    let lambda = p.lambda_f();
    // E^u = span of the unstable block, where the Jacobian is λ·I
    let inverse_unstable_norm = 1.0 / lambda;
    let per_chunk = exec::sweep(samples, seed, |range, rng| {
        let mut x = vec![c; n];
        let mut worst: (f64, f64) = (0.0, 0.0);
        for _ in range {
            for v in &mut x[m..] {
                *v = rng.gen_range(-1.0..1.0);
            }
            let jac = map.jacobian(&x);
            let tn = jac.view((m, m), (n - m, n - m)).clone_owned();
            let norm = tn.svd(false, false).singular_values.max();
            let img = map.eval(&x);
            let drift = img[..m].iter().map(|&u| arc_len(u, c)).fold(0.0, f64::max);
            worst = (worst.0.max(inverse_unstable_norm * norm), worst.1.max(drift));
        }
        worst
    });
    let (max_domination, invariance_error) =
        per_chunk.into_iter().fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(NhReport {
        slice,
        samples,
        inverse_unstable_norm,
        max_domination,
        invariance_error,
        pass: inverse_unstable_norm < 1.0 && max_domination < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endo::Construction;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn cone_ratio_examples() {
        assert_eq!(cone_ratio(&TangentVector::new(vec![1.0, 0.0, 0.0], 1).unwrap()).unwrap(), 0.0);
        assert_relative_eq!(
            cone_ratio(&TangentVector::new(vec![1.0, 0.3, 0.4], 1).unwrap()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(cone_ratio(&TangentVector::new(vec![0.0, 1.0, 0.0], 1).unwrap()).unwrap(), f64::INFINITY);
        assert!(matches!(cone_ratio(&TangentVector::new(vec![0.0; 3], 1).unwrap()), Err(Error::ZeroVector)));
    }

    #[test]
    fn fd_of_linear_map_is_exact() {
        let ctx = Construction::d3();
        let a = ctx.map(MapKind::Linear);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = vec![0.0; 3];
        for _ in 0..100 {
            uniform(&mut rng, &mut x);
            let j = jacobian_fd(&a, &x, 1e-6).unwrap();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![41.0, 1.0, 1.0]));
            assert!((j - d).amax() < 1e-6);
        }
        assert!(jacobian_fd(&a, &x, 0.0).is_err());
        assert!(jacobian_fd(&a, &x, 1e-13).is_err());
    }

    #[test]
    fn sampled_points_land_in_their_region() {
        let ctx = Construction::d3();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = vec![0.0; 3];
        for _ in 0..2000 {
            sample_point(&ctx, Region::Transition, &mut rng, &mut x);
            assert_eq!(ctx.layout.locate(&x[..1]).1, Zone::Transition);
            sample_point(&ctx, Region::Ball, &mut rng, &mut x);
            assert!(dist_raw(&x, &ctx.params.p) < ctx.params.l);
            sample_point(&ctx, Region::Complement, &mut rng, &mut x);
            assert!(ctx.layout.locate(&x[..1]).0.is_none());
            sample_point(&ctx, Region::Surgery, &mut rng, &mut x);
            let mut g = [0.0; 2];
            assert!(ctx.map(MapKind::Singular).surgery_terms(&x, &mut g).is_some());
        }
    }

    #[test]
    fn cone_vectors_have_the_requested_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v = vec![0.0; 5];
        for _ in 0..1000 {
            sample_cone_vector(&mut rng, 2, 5, 0.7, &mut v);
            assert_relative_eq!(cone_ratio_raw(&v, 2), 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn complement_ratio_is_divided_by_lambda() {
        let ctx = Construction::d3();
        let f = ctx.map(MapKind::Singular);
        let r = check_cone_invariance(&f, &ctx, Region::Complement, ctx.params.kappa, 10_000, 3).unwrap();
        assert_relative_eq!(r.max_ratio, ctx.params.kappa / 41.0, max_relative = 1e-12);
        assert!(check_cone_invariance(&f, &ctx, Region::Torus, 3.5, 1, 0).is_err());
    }

    #[test]
    fn axis_vector_expands_by_lambda() {
        let ctx = Construction::d3();
        let f = ctx.map(MapKind::Blended);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = vec![0.0; 3];
        for _ in 0..1000 {
            sample_point(&ctx, Region::BlendZone, &mut rng, &mut x);
            let j = f.jacobian(&x);
            let img = &j * nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]);
            assert!(img.norm() >= 41.0);
        }
    }

    #[test]
    fn nh_probe_on_every_slice() {
        let ctx = Construction::d3();
        for i in 0..ctx.params.centers.len() {
            let r = nh_inequalities_probe(&ctx, i, 2000, 9).unwrap();
            assert!(r.pass);
            assert_relative_eq!(r.inverse_unstable_norm, 1.0 / 41.0);
            assert!(r.invariance_error < 1e-12);
            if i <= ctx.params.k {
                assert!(r.max_domination <= (1.0 + ctx.params.alpha / 2.0) / 41.0 + 1e-12);
            } else {
                let bound = ctx.slice_member(i).jacobian_norm_bound() / 41.0;
                assert!(r.max_domination <= bound + 1e-12);
            }
        }
        assert!(nh_inequalities_probe(&ctx, 9, 1, 0).is_err());
    }

    #[test]
    fn chain_rule_for_f_squared() {
        let ctx = Construction::d3();
        let f = ctx.map(MapKind::Blended);
        struct Twice<'a>(&'a crate::endo::EndoMap);
        impl TorusMap for Twice<'_> {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn provenance(&self) -> crate::endo::Provenance {
                self.0.provenance()
            }
            fn eval_into(&self, x: &[f64], out: &mut [f64]) {
                let y = self.0.eval(x);
                self.0.eval_into(&y, out)
            }
            fn jacobian_into(&self, x: &[f64], jac: &mut DMatrix<f64>) {
                let y = self.0.eval(x);
                jac.copy_from(&(self.0.jacobian(&y) * self.0.jacobian(x)));
            }
        }
        let ff = Twice(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = vec![0.0; 3];
        for _ in 0..500 {
            sample_point(&ctx, Region::BlendZone, &mut rng, &mut x);
            let fd = jacobian_fd(&ff, &x, 1e-7).unwrap();
            assert!(jacobian_rel_error(&ff.jacobian(&x), &fd) < 1e-4);
        }
    }
}
