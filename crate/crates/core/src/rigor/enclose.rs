//! Interval enclosures of the profiles and of the Jacobians of the maps.
//!
//! Smoothstep pieces are monotone (or unimodal) on `[0, 1]`, so they are
//! enclosed by evaluating at the clamped endpoints rather than by naive
//! Horner evaluation, which would blow up badly. Piecewise profiles are
//! evaluated branch by branch and hulled over the branches the input touches.

use super::interval::Interval;
use crate::endo::{Construction, MapKind};
use crate::ifs::Member;
use crate::profiles::{PhiSpec, PsiSpec, PHI_CENTER, PSI_HEIGHT, PSI_PEAK};

#[inline]
fn pt(x: f64) -> Interval {
    Interval::point(x)
}

/// `S(t)` on a degenerate input, rounded outward.
fn s_point(t: f64) -> Interval {
    let t = pt(t);
    t.powi(3) * (t * (t * 6.0 - 15.0) + 10.0)
}

fn s_int_point(t: f64) -> Interval {
    let t = pt(t);
    t.powi(4) * (t * (t - 3.0) + 2.5)
}

fn q_point(t: f64) -> Interval {
    pt(t) * (pt(1.0) - pt(t))
}

/// `S` clamped to `[0, 1]` outside the unit interval.
pub fn smoothstep(t: Interval) -> Interval {
    let c = t.clamp(0.0, 1.0);
    Interval::new(s_point(c.lo()).lo().max(0.0), s_point(c.hi()).hi().min(1.0))
}

/// `S'`, zero outside `[0, 1]`.
pub fn smoothstep_d1(t: Interval) -> Interval {
    let c = t.clamp(0.0, 1.0);
    let (qa, qb) = (q_point(c.lo()), q_point(c.hi()));
    let lo = qa.lo().min(qb.lo()).max(0.0);
    let hi = if c.contains(0.5) { 0.25 } else { qa.hi().max(qb.hi()) };
    let q = Interval::new(lo, hi.max(lo));
    let d = q.sqr() * 30.0;
    if t.lo() < 0.0 || t.hi() > 1.0 { d.hull(&Interval::ZERO) } else { d }
}

/// `∫_0^t S` for `t` clamped to `[0, 1]`.
pub fn smoothstep_integral(t: Interval) -> Interval {
    let c = t.clamp(0.0, 1.0);
    Interval::new(s_int_point(c.lo()).lo().max(0.0), s_int_point(c.hi()).hi())
}

/// Value and derivative of the bump of half-width `r` around `center`, read
/// on the circle, for a coordinate interval inside `[-1, 1]`.
pub fn bump(x: Interval, center: f64, r: f64) -> (Interval, Interval) {
    let support = Interval::new(-2.0 * r, 2.0 * r);
    let mut acc: Option<(Interval, Interval)> = None;
    for shift in [-2.0, 0.0, 2.0] {
        let d = x - center + shift;
        if d.intersect(&support).is_none() || d.hi() <= support.lo() || d.lo() >= support.hi() {
            continue;
        }
        let t = (d.abs() - r).scale(1.0 / r);
        let v = pt(1.0) - smoothstep(t);
        let sign = if d.lo() >= 0.0 {
            pt(1.0)
        } else if d.hi() <= 0.0 {
            pt(-1.0)
        } else {
            Interval::new(-1.0, 1.0)
        };
        let dv = -(smoothstep_d1(t) * sign).scale(1.0 / r);
        acc = Some(match acc {
            None => (v, dv),
            Some((a, b)) => (a.hull(&v), b.hull(&dv)),
        });
    }
    acc.unwrap_or((Interval::ZERO, Interval::ZERO))
}

/// `U_i` and `∇U_i` for every slice the unstable box touches.
pub fn slice_blend(ctx: &Construction, xu: &[Interval]) -> Vec<(usize, Interval, Vec<Interval>)> {
    let layout = &ctx.layout;
    let mut out = Vec::new();
    for (i, &c) in layout.centers.iter().enumerate() {
        let parts: Vec<(Interval, Interval)> = xu.iter().map(|&x| bump(x, c, layout.r)).collect();
        if parts.iter().any(|(v, _)| v.is_point() && v.lo() == 0.0) {
            continue;
        }
        let u = parts.iter().fold(Interval::ONE, |a, (v, _)| a * *v);
        let grad = (0..parts.len())
            .map(|j| {
                parts
                    .iter()
                    .enumerate()
                    .fold(Interval::ONE, |a, (l, (v, dv))| a * if l == j { *dv } else { *v })
            })
            .collect();
        out.push((i, u, grad));
    }
    out
}

/// Global enclosures of a member's lifted displacement and Jacobian
/// diagonal, valid on the whole torus.
pub fn member_bounds(member: &Member, k: usize) -> (Vec<Interval>, Vec<Interval>) {
    use std::f64::consts::PI;
    match member {
        Member::Shrinking { g, .. } => {
            let h = pt(0.5) * pt(g.alpha);
            let w = pt(1.5) * pt(g.a0);
            let disp = h * Interval::new(-w.hi(), w.hi());
            let diag = pt(1.0) + h * Interval::new(-g.c, 1.0);
            (vec![disp; k], vec![diag; k])
        }
        Member::Translation { v } => (v.iter().map(|&x| pt(x)).collect(), vec![Interval::ONE; k]),
        Member::NorthSouth { w, eta, .. } => {
            let unit = Interval::new(-1.0, 1.0);
            let disp = w.iter().map(|&x| pt(x) + pt(*eta) * unit).collect();
            let diag = pt(1.0) + pt(*eta) * pt(PI) * unit;
            (disp, vec![diag; k])
        }
    }
}

/// `ψ` and `ψ'` for `s` in an interval.
pub fn psi(spec: &PsiSpec, s: Interval) -> (Interval, Interval) {
    let tau = (s - PSI_PEAK).div(&pt(spec.theta)).expect("theta > 0");
    let tc = tau.clamp(-1.0, 1.0);
    let u = (pt(1.0) - tc.sqr()).clamp(0.0, 1.0);
    let value = u.powi(3) * PSI_HEIGHT;
    let deriv = (tc * u.sqr() * (-6.0 * PSI_HEIGHT)).div(&pt(spec.theta)).expect("theta > 0");
    (value, deriv)
}

/// `φ` and `φ'` for `z` in an interval.
pub fn phi(spec: &PhiSpec, z: Interval) -> (Interval, Interval) {
    let sigma = (z - PHI_CENTER).div(&pt(spec.delta)).expect("delta > 0");
    let nodes = &spec.nodes;
    let last = nodes.len() - 1;
    let mut acc: Option<(Interval, Interval)> = None;
    let mut push = |v: Interval, d: Interval| {
        acc = Some(match acc {
            None => (v, d),
            Some((a, b)) => (a.hull(&v), b.hull(&d)),
        });
    };
    for i in 0..last {
        let piece = Interval::new(nodes[i], nodes[i + 1]);
        let Some(part) = sigma.intersect(&piece) else { continue };
        let w = nodes[i + 1] - nodes[i];
        let t = (part - nodes[i]).div(&pt(w)).expect("nodes increase").clamp(0.0, 1.0);
        let (vi, dv) = (pt(spec.values[i]), pt(spec.values[i + 1]) - pt(spec.values[i]));
        let dphi = vi + dv * smoothstep(t);
        let big = pt(spec.cumulative[i]) + pt(w) * (vi * t + dv * smoothstep_integral(t));
        push(big * spec.delta, dphi);
    }
    // off the support the map drops the correction entirely
    if sigma.lo() < nodes[0] || sigma.hi() > nodes[last] {
        let ends = pt(spec.cumulative[0]).hull(&pt(spec.cumulative[last])) * spec.delta;
        push(ends.hull(&Interval::ZERO), Interval::ZERO);
    }
    acc.expect("sigma meets the support or lies off it")
}

/// Arc offset of a coordinate interval from `c`, within `[-1, 1]`.
fn arc_offset(x: Interval, c: f64) -> Interval {
    let d = x - c;
    if d.lo() >= -1.0 && d.hi() <= 1.0 {
        d
    } else {
        Interval::new(-1.0, 1.0)
    }
}

/// `χ` and `∇χ` for the surgery cutoff over a box in `x~`.
pub fn cutoff(ctx: &Construction, xt: &[Interval]) -> (Interval, Vec<Interval>) {
    let cut = &ctx.cutoff;
    let d: Vec<Interval> = xt.iter().zip(&cut.center).map(|(&x, &c)| arc_offset(x, c)).collect();
    let rho = d.iter().fold(Interval::ZERO, |a, di| a + di.sqr()).sqrt().expect("sum of squares");
    let w = pt(cut.outer) - pt(cut.inner);
    let t = (rho - cut.inner).div(&w).expect("outer > inner");
    let chi = pt(1.0) - smoothstep(t);
    let scale = -smoothstep_d1(t).div(&w).expect("outer > inner");
    let grad = d
        .iter()
        .map(|di| {
            let unit = Interval::new(-1.0, 1.0);
            let q = if rho.lo() > 0.0 {
                di.div(&rho).ok().and_then(|q| q.intersect(&unit)).unwrap_or(unit)
            } else {
                unit
            };
            scale * q
        })
        .collect();
    (chi, grad)
}

/// `1 - φ'ψχ` over a box; the Jacobian determinant is `λ^m` times this.
pub fn fold_defect(ctx: &Construction, x: &[Interval]) -> Interval {
    let n = x.len();
    let (_, dphi) = phi(&ctx.phi, x[n - 1]);
    let s = x[..n - 1].iter().fold(Interval::ZERO, |a, xi| a + xi.sqr());
    let (psi_v, _) = psi(&ctx.psi, s);
    let (chi, _) = cutoff(ctx, &x[..n - 1]);
    pt(1.0) - dphi * psi_v * chi
}

/// Row-major `n × n` interval matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IMatrix {
    pub n: usize,
    pub entries: Vec<Interval>,
}

impl IMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Interval::ZERO; n * n];
        for i in 0..n {
            entries[i * n + i] = Interval::ONE;
        }
        Self { n, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Interval) {
        self.entries[i * self.n + j] = v;
    }

    pub fn hull(&self, other: &IMatrix) -> IMatrix {
        IMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.hull(b)).collect(),
        }
    }

    pub fn contains(&self, m: &nalgebra::DMatrix<f64>) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j).contains(m[(i, j)])))
    }
}

/// Entrywise enclosure of the Jacobian of `kind` over a box of canonical
/// coordinates.
pub fn jacobian(ctx: &Construction, kind: MapKind, x: &[Interval]) -> IMatrix {
    let p = &ctx.params;
    let (n, m, k) = (p.n, p.m, p.k);
    let mut base = IMatrix::identity(n);
    for j in 0..m {
        base.set(j, j, pt(p.lambda_f()));
    }
    if kind == MapKind::Linear {
        return base;
    }
    let touched = slice_blend(ctx, &x[..m]);
    let mut jac = base.clone();
    for (t, (i, u, grad)) in touched.iter().enumerate() {
        let (disp, diag) = member_bounds(ctx.slice_member(*i), k);
        let mut ji = base.clone();
        for a in 0..k {
            if kind == MapKind::Fhat {
                ji.set(m + a, m + a, diag[a].hull(&Interval::ONE));
                continue;
            }
            for j in 0..m {
                ji.set(m + a, j, grad[j] * disp[a]);
            }
            ji.set(m + a, m + a, pt(1.0) + *u * (diag[a] - 1.0));
        }
        jac = if t == 0 { ji } else { jac.hull(&ji) };
    }
    if kind == MapKind::Singular {
        let (phi_v, dphi) = phi(&ctx.phi, x[n - 1]);
        let s = x[..n - 1].iter().fold(Interval::ZERO, |a, xi| a + xi.sqr());
        let (psi_v, dpsi) = psi(&ctx.psi, s);
        let (chi, gchi) = cutoff(ctx, &x[..n - 1]);
        for j in 0..n - 1 {
            let term = phi_v * (dpsi * x[j] * 2.0 * chi + psi_v * gchi[j]);
            jac.set(n - 1, j, jac.get(n - 1, j) - term);
        }
        jac.set(n - 1, n - 1, jac.get(n - 1, n - 1) - dphi * psi_v * chi);
    }
    jac
}

/// Determinant enclosure: the diagonal product when the matrix is lower
/// triangular, cofactor expansion otherwise (small `n` only).
pub fn determinant(mat: &IMatrix) -> Option<Interval> {
    let n = mat.n;
    let lower = (0..n).all(|i| (i + 1..n).all(|j| mat.get(i, j) == Interval::ZERO));
    if lower {
        return Some((0..n).fold(Interval::ONE, |a, i| a * mat.get(i, i)));
    }
    if n > 6 {
        return None;
    }
    fn cofactor(mat: &IMatrix, rows: &[usize], cols: &[usize]) -> Interval {
        if rows.len() == 1 {
            return mat.get(rows[0], cols[0]);
        }
        let mut acc = Interval::ZERO;
        for (c, &col) in cols.iter().enumerate() {
            let e = mat.get(rows[0], col);
            if e == Interval::ZERO {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != col).collect();
            let minor = cofactor(mat, &rows[1..], &rest);
            let term = e * minor;
            acc = if c % 2 == 0 { acc + term } else { acc - term };
        }
        acc
    }
    let idx: Vec<usize> = (0..n).collect();
    Some(cofactor(mat, &idx, &idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endo::TorusMap;
    use crate::profiles::smoothstep as s;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn smoothstep_enclosures_contain_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let a = rng.gen_range(-0.3..1.3);
            let b = a + rng.gen_range(0.0..0.5);
            let e = smoothstep(iv(a, b));
            let d = smoothstep_d1(iv(a, b));
            for i in 0..=20 {
                let t = a + (b - a) * i as f64 / 20.0;
                let tc = t.clamp(0.0, 1.0);
                // the float profiles carry their own rounding
                let near = |i: Interval, v: f64| i.lo() - 1e-14 <= v && v <= i.hi() + 1e-14;
                assert!(near(e, s::value(tc)));
                let d1 = if (0.0..=1.0).contains(&t) { s::d1(t) } else { 0.0 };
                assert!(near(d, d1), "{d} misses {d1} at {t}");
            }
        }
        let full = smoothstep(iv(0.0, 1.0));
        assert_eq!((full.lo(), full.hi()), (0.0, 1.0));
        assert!(smoothstep_d1(iv(0.0, 1.0)).hi() >= 1.875);
    }

    #[test]
    fn psi_over_its_support_stays_in_zero_two() {
        let ctx = Construction::d3();
        let theta = ctx.psi.theta;
        let (v, d) = psi(&ctx.psi, iv(PSI_PEAK - theta, PSI_PEAK + theta));
        let u = 1e-12;
        assert!(v.lo() >= -u && v.hi() <= 2.0 + u, "{v}");
        assert!(v.contains(2.0) && v.contains(0.0));
        assert!(d.mag() >= ctx.psi.analytic_max_derivative());
    }

    #[test]
    fn fold_defect_on_the_ball() {
        let ctx = Construction::d3();
        let p = &ctx.params;
        let b: Vec<Interval> = p.p.iter().map(|&c| iv(c - p.l, c + p.l)).collect();
        let e = fold_defect(&ctx, &b);
        let u = 1e-12;
        assert!(e.lo() >= -1.0 - u && e.hi() <= 2.5 + u, "{e}");
    }

    #[test]
    fn jacobian_enclosure_contains_point_jacobians() {
        let ctx = Construction::d3();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = &ctx.params;
        for kind in [MapKind::Linear, MapKind::Fhat, MapKind::Blended, MapKind::Singular] {
            let map = ctx.map(kind);
            for trial in 0..300 {
                // alternate between boxes near the slices, near p, and anywhere
                let center: Vec<f64> = match trial % 3 {
                    0 => {
                        let c = p.centers[rng.gen_range(0..p.centers.len())];
                        vec![c + rng.gen_range(-0.06..0.06), rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)]
                    }
                    1 => p.p.iter().map(|&c| c + rng.gen_range(-0.05..0.05)).collect(),
                    _ => (0..3).map(|_| rng.gen_range(-0.9..0.9)).collect(),
                };
                let hw = rng.gen_range(1e-4..0.02);
                let b: Vec<Interval> = center.iter().map(|&c| iv(c - hw, c + hw)).collect();
                let enc = jacobian(&ctx, kind, &b);
                for _ in 0..20 {
                    let x: Vec<f64> = center.iter().map(|&c| c + rng.gen_range(-hw..hw)).collect();
                    assert!(enc.contains(&map.jacobian(&x)), "{kind:?} at {x:?}");
                }
            }
        }
    }

    #[test]
    fn determinant_matches_diagonal_product() {
        let ctx = Construction::d3();
        let p = &ctx.params;
        let q1: Vec<Interval> = p.q1().iter().map(|&c| Interval::point(c)).collect();
        let det = determinant(&jacobian(&ctx, MapKind::Singular, &q1)).unwrap();
        assert!(det.contains(102.5) || (det.mid() - 102.5).abs() < 1e-9, "{det}");
        let mut full = IMatrix::identity(3);
        full.set(0, 1, Interval::point(2.0));
        full.set(1, 0, Interval::point(3.0));
        // [[1,2,0],[3,1,0],[0,0,1]] has determinant -5
        assert!(determinant(&full).unwrap().contains(-5.0));
    }
}
