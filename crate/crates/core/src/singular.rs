//! Critical set of `F` and persistence of the fold under `C¹` perturbation.
//!
//! Inside the surgery support `det DF = λ^m (1 - φ'(x_n) ψ(Σ_{j<n} x_j²) χ(x~))`
//! and elsewhere `det DF = λ^m`. The fold sits where `φ'ψχ = 1`.

use serde::{Deserialize, Serialize};

use crate::endo::{perturb, Construction, EndoMap, MapKind, PerturbationField, TorusMap};
use crate::error::{Error, Result};
use crate::exec;
use crate::tangent::jacobian_fd;
use crate::torus::dist_raw;

/// Tolerance on `|1 - φ'ψχ|` for reported critical points.
pub const CRITICAL_TOL: f64 = 1e-12;

/// `1 - φ'ψχ` at canonical `x`.
pub fn fold_defect(map: &EndoMap, x: &[f64]) -> f64 {
    let mut g = [0.0; 16];
    let n = x.len();
    map.surgery_terms(x, &mut g[..n - 1]).map_or(1.0, |t| 1.0 - t.fold())
}

/// `det DF(x)` from profile values, for `x ∈ B(p, l)`.
pub fn det_f(ctx: &std::sync::Arc<Construction>, x: &[f64]) -> Result<f64> {
    let p = &ctx.params;
    if x.len() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: x.len() });
    }
    if dist_raw(x, &p.p) >= p.l {
        return Err(Error::OutsideDomain);
    }
    let map = ctx.map(MapKind::Singular);
    Ok(p.lambda_pow_m() * fold_defect(&map, x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: Vec<f64>,
    pub det: f64,
}

/// Roots of `1 - φ'ψχ` along the segment `a → b`, found by bisection on a
/// uniform pre-scan of `pieces` sub-segments.
pub fn critical_slice(ctx: &std::sync::Arc<Construction>, a: &[f64], b: &[f64]) -> Result<Vec<CriticalPoint>> {
    let p = &ctx.params;
    for end in [a, b] {
        if end.len() != p.n {
            return Err(Error::DimensionMismatch { expected: p.n, got: end.len() });
        }
        if dist_raw(end, &p.p) >= p.l {
            return Err(Error::OutsideDomain);
        }
    }
    let map = ctx.map(MapKind::Singular);
    let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(&u, &v)| u + t * (v - u)).collect() };
    let defect = |t: f64| fold_defect(&map, &at(t));
    let roots = bracket_roots(&defect, 64);
    if roots.is_empty() {
        return Err(Error::NoSignChange);
    }
    Ok(roots
        .into_iter()
        .map(|t| {
            let point = at(t);
            let det = p.lambda_pow_m() * fold_defect(&map, &point);
            CriticalPoint { point, det }
        })
        .collect())
}

/// Bisects every sign change of `g` on a `pieces`-uniform scan of `[0, 1]`.
fn bracket_roots(g: &dyn Fn(f64) -> f64, pieces: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut t0 = 0.0;
    let mut g0 = g(t0);
    for i in 1..=pieces {
        let t1 = i as f64 / pieces as f64;
        let g1 = g(t1);
        if g0 == 0.0 {
            roots.push(t0);
        } else if g0.signum() != g1.signum() && g1 != 0.0 {
            roots.push(bisect(g, t0, t1, g0));
        }
        t0 = t1;
        g0 = g1;
    }
    if g0 == 0.0 {
        roots.push(t0);
    }
    roots
}

fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let s_lo = g_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() < CRITICAL_TOL || mid == lo || mid == hi {
            return mid;
        }
        if gm.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub resolution: usize,
    pub points: Vec<Vec<f64>>,
    pub det_p: f64,
    pub det_q1: f64,
    pub det_q2: f64,
    /// Root on the `q2 → q1` segment.
    pub bracket: Vec<CriticalPoint>,
    /// Largest `|1 - φ'ψχ|` over the reported points.
    pub max_defect: f64,
}

/// Scans `z`-lines over a `resolution^(n-1)` grid of the cutoff disk around
/// `p~` and refines every sign change of `1 - φ'ψχ`.
pub fn critical_set_sample(ctx: &std::sync::Arc<Construction>, resolution: usize) -> Result<CriticalReport> {
    if resolution < 8 {
        return Err(Error::OutOfRange(format!("resolution {resolution} < 8")));
    }
    let p = &ctx.params;
    let n = p.n;
    let map = ctx.map(MapKind::Singular);
    let (zlo, zhi) = ctx.phi.support();
    let radius = ctx.cutoff.outer;
    let lines = resolution.pow((n - 1) as u32);
    let per_line = exec::map_indexed(lines, |idx| {
        let mut x = vec![0.0; n];
        let mut rem = idx;
        for j in 0..n - 1 {
            let step = rem % resolution;
            rem /= resolution;
            x[j] = p.p[j] - radius + 2.0 * radius * step as f64 / (resolution - 1) as f64;
        }
        let mut out = Vec::new();
        let line = |t: f64| {
            let mut y = x.clone();
            y[n - 1] = zlo + t * (zhi - zlo);
            y
        };
        for t in bracket_roots(&|t| fold_defect(&map, &line(t)), 4 * resolution) {
            let y = line(t);
            if fold_defect(&map, &y).abs() < 1e-10 {
                out.push(y);
            }
        }
        out
    });
    let points: Vec<Vec<f64>> = per_line.into_iter().flatten().collect();
    let max_defect = points.iter().map(|x| fold_defect(&map, x).abs()).fold(0.0, f64::max);
    let bracket = critical_slice(ctx, &p.q2(), &p.q1())?;
    Ok(CriticalReport {
        resolution,
        det_p: det_f(ctx, &p.p)?,
        det_q1: det_f(ctx, &p.q1())?,
        det_q2: det_f(ctx, &p.q2())?,
        points,
        bracket,
        max_defect,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceTrial {
    pub seed: u64,
    pub det_q2_fd: f64,
    pub det_q1_fd: f64,
    pub det_q2_analytic: f64,
    pub det_q1_analytic: f64,
    /// Parameter of the sign change along `q2 → q1`, if found.
    pub root: Option<f64>,
    pub found: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceVerdict {
    pub eps: f64,
    pub trials: Vec<PersistenceTrial>,
    pub pass: bool,
}

/// Finite-difference step for perturbed-map determinants.
pub const FD_STEP: f64 = 1e-6;

/// For `trials` random perturbations of size `eps`, looks for a determinant
/// sign change of the perturbed map along `q2 → q1`, using finite-difference
/// Jacobians and cross-checking against the composed analytic ones.
pub fn persistence_probe(ctx: &std::sync::Arc<Construction>, eps: f64, trials: usize, seed: u64) -> Result<PersistenceVerdict> {
    if !(eps >= 0.0) {
        return Err(Error::OutOfRange(format!("ε_pert = {eps} must be non-negative")));
    }
    let p = &ctx.params;
    let (q1, q2) = (p.q1(), p.q2());
    let base = ctx.map(MapKind::Singular);
    let results = exec::map_indexed(trials, |t| {
        let trial_seed = exec::sub_seed(seed, t as u64);
        let field = PerturbationField::random(p.n, eps, 2, trial_seed);
        let g = perturb(base.clone(), field);
        let det_fd = |x: &[f64]| jacobian_fd(&g, x, FD_STEP).map(|j| j.determinant()).unwrap_or(f64::NAN);
        let (d2, d1) = (det_fd(&q2), det_fd(&q1));
        let found = d2.signum() != d1.signum() && d1 != 0.0 && d2 != 0.0;
        let root = found.then(|| {
            let at = |s: f64| -> Vec<f64> { q2.iter().zip(&q1).map(|(&u, &v)| u + s * (v - u)).collect() };
            bisect(&|s| det_fd(&at(s)), 0.0, 1.0, d2)
        });
        PersistenceTrial {
            seed: trial_seed,
            det_q2_fd: d2,
            det_q1_fd: d1,
            det_q2_analytic: g.jacobian(&q2).determinant(),
            det_q1_analytic: g.jacobian(&q1).determinant(),
            root,
            found,
        }
    });
    let pass = results.iter().all(|t| t.found);
    Ok(PersistenceVerdict { eps, trials: results, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn determinant_examples() {
        let ctx = Construction::d3();
        let p = &ctx.params;
        assert!(det_f(&ctx, &p.p).unwrap().abs() < 1e-10 * 41.0);
        assert_relative_eq!(det_f(&ctx, &p.q1()).unwrap(), 102.5, max_relative = 1e-9);
        assert_relative_eq!(det_f(&ctx, &p.q2()).unwrap(), -41.0, max_relative = 1e-9);
        assert!(matches!(det_f(&ctx, &[0.0, 0.0, 0.0]), Err(Error::OutsideDomain)));
    }

    #[test]
    fn slice_root_between_pinned_nodes() {
        let ctx = Construction::d3();
        let p = &ctx.params;
        let roots = critical_slice(&ctx, &p.q2(), &p.q1()).unwrap();
        assert!(!roots.is_empty());
        for r in &roots {
            assert!(r.det.abs() < 1e-9 * 41.0);
            let z = r.point[2];
            assert!(z > 0.25 + p.delta / 8.0 && z < 0.25 + p.delta / 4.0);
        }
    }

    #[test]
    fn segment_outside_the_annulus_has_no_root() {
        let ctx = Construction::d3();
        // x1 = -0.75 + 0.08 puts Σx² well below the ψ-support
        let a = [-0.67, 0.0, 0.25];
        let b = [-0.67, 0.0, 0.2503];
        assert!(matches!(critical_slice(&ctx, &a, &b), Err(Error::NoSignChange)));
    }

    #[test]
    fn cloud_contains_p_and_stays_in_the_ball() {
        let ctx = Construction::d3();
        let p = &ctx.params;
        let rep = critical_set_sample(&ctx, 33).unwrap();
        assert!(!rep.points.is_empty());
        assert!(rep.max_defect < 1e-10);
        assert!(rep.points.iter().all(|x| dist_raw(x, &p.p) < p.l));
        let nearest = rep.points.iter().map(|x| dist_raw(x, &p.p)).fold(f64::INFINITY, f64::min);
        assert!(nearest < p.delta, "nearest = {nearest}");
        assert!(critical_set_sample(&ctx, 4).is_err());
    }

    #[test]
    fn zero_perturbation_keeps_the_exact_determinants() {
        let ctx = Construction::d3();
        let v = persistence_probe(&ctx, 0.0, 3, 1).unwrap();
        assert!(v.pass);
        for t in &v.trials {
            assert_relative_eq!(t.det_q1_analytic, 102.5, max_relative = 1e-9);
            assert_relative_eq!(t.det_q2_analytic, -41.0, max_relative = 1e-9);
            assert_relative_eq!(t.det_q1_fd, 102.5, max_relative = 1e-2);
        }
    }

    #[test]
    fn probe_is_reproducible() {
        let ctx = Construction::d3();
        let a = persistence_probe(&ctx, 0.4, 5, 11).unwrap();
        let b = exec::with_mode(exec::Mode::Sequential, || persistence_probe(&ctx, 0.4, 5, 11).unwrap());
        assert_eq!(a, b);
        assert!(a.pass);
    }
}
