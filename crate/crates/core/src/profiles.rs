//! Scalar profile functions: slice bumps `u`/`U`, the shrinking-family
//! generator `g_a` and its smoothing `g~`, the radial peak `ψ`, the vertical
//! profile `φ` and the ball cutoff `χ`.
//!
//! Every smooth transition is built from the quintic smoothstep
//! `S(t) = 6t^5 - 15t^4 + 10t^3`, which is C² with `S'` and `S''` vanishing at
//! both ends. All derivatives returned here are exact derivatives of the
//! implemented closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{arc_diff, arc_len, reduce_coord};

/// Quintic smoothstep and its derivatives on `[0, 1]`.
pub mod smoothstep {
    #[inline]
    pub fn value(t: f64) -> f64 {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }

    #[inline]
    pub fn d1(t: f64) -> f64 {
        let s = t * (1.0 - t);
        30.0 * s * s
    }

    #[inline]
    pub fn d2(t: f64) -> f64 {
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    }

    /// `∫_0^t S`.
    #[inline]
    pub fn integral(t: f64) -> f64 {
        let t4 = t * t * t * t;
        t4 * (t * (t - 3.0) + 2.5)
    }

    /// Largest value of `S'` on `[0, 1]`, attained at `t = 1/2`.
    pub const D1_MAX: f64 = 1.875;
}

/// `u(x)`: equal to 1 on `[c - r, c + r]`, 0 outside `(c - 2r, c + 2r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub r: f64,
}

impl BumpSpec {
    pub fn new(center: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::OutOfRange(format!("bump half-width r = {r} must be positive")));
        }
        Ok(Self { center, r })
    }

    /// Value and derivative at `x` on the real line.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        bump_offset(x - self.center, self.r)
    }

    /// Same bump read on the circle (offset taken along the shortest arc).
    #[inline]
    pub fn eval_circle(&self, x: f64) -> (f64, f64) {
        bump_offset(arc_diff(self.center, x), self.r)
    }

    pub fn derivative_bound(&self) -> f64 {
        smoothstep::D1_MAX / self.r
    }
}

#[inline]
fn bump_offset(d: f64, r: f64) -> (f64, f64) {
    let a = d.abs();
    if a <= r {
        (1.0, 0.0)
    } else if a >= 2.0 * r {
        (0.0, 0.0)
    } else {
        let t = (a - r) / r;
        let v = 1.0 - smoothstep::value(t);
        let dv = -smoothstep::d1(t) / r;
        (v, if d > 0.0 { dv } else { -dv })
    }
}

/// Free-function form of [`BumpSpec::eval`].
pub fn bump_eval(spec: &BumpSpec, x: f64) -> Result<(f64, f64)> {
    BumpSpec::new(spec.center, spec.r)?;
    Ok(spec.eval(x))
}

/// Diagonal slice cubes `[c_i - r, c_i + r]^m` in `T^m` and the blending
/// function `U = Σ U_i`, `U_i(x) = Π_j u_i(x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceLayout {
    pub centers: Vec<f64>,
    pub r: f64,
    pub m: usize,
}

/// Where a point of `T^m` sits relative to the slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    /// Inside the core cube `K_i` (`U ≡ 1`).
    Core,
    /// In `K~_i` but not in `K_i`.
    Transition,
    Outside,
}

impl SliceLayout {
    pub fn new(centers: Vec<f64>, r: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(r > 0.0) {
            return Err(Error::OutOfRange("slice half-width must be positive".into()));
        }
        let centers: Vec<f64> = centers.into_iter().map(reduce_coord).collect();
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if arc_len(centers[i], centers[j]) <= 4.0 * r {
                    return Err(Error::OverlappingSlices(i, j));
                }
            }
        }
        Ok(Self { centers, r, m })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Index of the slice `K~_i` containing `x` and the zone tag.
    pub fn locate(&self, x: &[f64]) -> (Option<usize>, Zone) {
        debug_assert_eq!(x.len(), self.m);
        for (i, &c) in self.centers.iter().enumerate() {
            let mut worst = 0.0f64;
            let mut inside = true;
            for &xj in x {
                let d = arc_len(xj, c);
                if d >= 2.0 * self.r {
                    inside = false;
                    break;
                }
                worst = worst.max(d);
            }
            if inside {
                let zone = if worst <= self.r { Zone::Core } else { Zone::Transition };
                return (Some(i), zone);
            }
        }
        (None, Zone::Outside)
    }

    /// `U(x)` and `∇U(x)` given the slice already located.
    pub fn eval_in(&self, slice: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let bump = BumpSpec { center: self.centers[slice], r: self.r };
        let m = x.len();
        let mut vals = [0.0f64; 16];
        let mut ders = [0.0f64; 16];
        let (vals, ders): (&mut [f64], &mut [f64]) = if m <= 16 {
            (&mut vals[..m], &mut ders[..m])
        } else {
            // wide tori are not a hot path
            return self.eval_in_alloc(slice, x, grad);
        };
        for j in 0..m {
            let (v, d) = bump.eval_circle(x[j]);
            vals[j] = v;
            ders[j] = d;
        }
        let value: f64 = vals.iter().product();
        for j in 0..m {
            let mut g = ders[j];
            for (l, &v) in vals.iter().enumerate() {
                if l != j {
                    g *= v;
                }
            }
            grad[j] = g;
        }
        value
    }

    fn eval_in_alloc(&self, slice: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let bump = BumpSpec { center: self.centers[slice], r: self.r };
        let pairs: Vec<(f64, f64)> = x.iter().map(|&xj| bump.eval_circle(xj)).collect();
        let value = pairs.iter().map(|p| p.0).product();
        for j in 0..x.len() {
            grad[j] = pairs
                .iter()
                .enumerate()
                .map(|(l, p)| if l == j { p.1 } else { p.0 })
                .product();
        }
        value
    }

    /// `U(x)` and `∇U(x)`.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; x.len()];
        match self.locate(x).0 {
            Some(i) => {
                let v = self.eval_in(i, x, &mut grad);
                (v, grad)
            }
            None => (0.0, grad),
        }
    }
}

/// Free-function form of [`SliceLayout::eval`].
pub fn u_eval(layout: &SliceLayout, x: &[f64]) -> (f64, Vec<f64>) {
    layout.eval(x)
}

/// The piecewise-linear circle map `g_a` with slope `1 + α/2` on `[-a, a]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiecewiseLinearG {
    pub a: f64,
    pub alpha: f64,
}

impl PiecewiseLinearG {
    /// `d` is the dimension of the torus the family acts on.
    pub fn new(a: f64, alpha: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(a > 0.0 && a < 1.0 / (4.0 * d as f64)) {
            return Err(Error::OutOfRange(format!("a = {a} not in (0, 1/(4d))")));
        }
        if !(alpha > 0.0) {
            return Err(Error::OutOfRange(format!("alpha = {alpha} must be positive")));
        }
        Ok(Self { a, alpha })
    }

    pub fn outer_slope(&self) -> f64 {
        1.0 + self.a * self.alpha / (2.0 * (self.a - 1.0))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = self.outer_slope();
        if x < -self.a {
            s * (x + 1.0) - 1.0
        } else if x <= self.a {
            (1.0 + self.alpha / 2.0) * x
        } else {
            s * (x - 1.0) + 1.0
        }
    }
}

/// Free-function form of [`PiecewiseLinearG::eval`] on `T^d`.
pub fn g_a_eval(a: f64, alpha: f64, x: f64, d: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("x = {x} not in [-1, 1]")));
    }
    Ok(PiecewiseLinearG::new(a, alpha, d)?.eval(x))
}

/// Smooth almost-contraction `g~(x) = x + (α/2) w(x)` of the circle.
///
/// `w` is odd and 2-periodic with `w' = -c + (1 + c) b(|x|)`, where `b` is the
/// bump equal to 1 on `[0, a0]` and 0 beyond `2 a0`; `c` makes `w(1) = 0`.
/// So `g~` expands (slope up to `1 + α/2`) only on `(-2a0, 2a0)`, contracts
/// with slope `1 - cα/2` elsewhere, and fixes `0` and `±1`. Outside the
/// expanding zone it agrees in slope with `g_a` for `a = 3a0/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GTilde {
    pub a0: f64,
    pub alpha: f64,
    pub c: f64,
}

impl GTilde {
    pub fn new(a0: f64, alpha: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(a0 > 0.0 && a0 <= 1.0 / (8.0 * d as f64)) {
            return Err(Error::OutOfRange(format!("a0 = {a0} not in (0, 1/(8d)]")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::OutOfRange(format!("alpha = {alpha} not in (0, 1]")));
        }
        let c = 1.5 * a0 / (1.0 - 1.5 * a0);
        Ok(Self { a0, alpha, c })
    }

    /// Equivalent `a` of the piecewise-linear map this smooths.
    pub fn equivalent_a(&self) -> f64 {
        1.5 * self.a0
    }

    /// `w(x)` and `w'(x)` for canonical `x`.
    #[inline]
    pub fn w(&self, x: f64) -> (f64, f64) {
        let x = reduce_coord(x);
        let a = x.abs();
        let s = x.signum();
        let a0 = self.a0;
        let c = self.c;
        if a <= a0 {
            (x, 1.0)
        } else if a < 2.0 * a0 {
            let t = (a - a0) / a0;
            let big_b = a0 + a0 * (t - smoothstep::integral(t));
            let b = 1.0 - smoothstep::value(t);
            (s * (-c * a + (1.0 + c) * big_b), -c + (1.0 + c) * b)
        } else {
            (s * (-c * a + (1.0 + c) * 1.5 * a0), -c)
        }
    }

    /// Value (canonical) and derivative.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (w, dw) = self.w(x);
        let h = 0.5 * self.alpha;
        (reduce_coord(x + h * w), 1.0 + h * dw)
    }

    /// Slope outside the expanding zone.
    pub fn contraction_slope(&self) -> f64 {
        1.0 - 0.5 * self.alpha * self.c
    }

    pub fn max_slope(&self) -> f64 {
        1.0 + 0.5 * self.alpha
    }

    /// Inverse on the circle, accurate to a few ulps.
    pub fn inverse(&self, y: f64) -> f64 {
        let y = reduce_coord(y);
        let h = 0.5 * self.alpha;
        // |g~(x) - x| < α/2, so the preimage lies within α/2 of y on the lift.
        let (mut lo, mut hi) = (y - h, y + h);
        let mut x = y;
        for _ in 0..100 {
            let (w, dw) = self.w(x);
            let gx = x + h * w;
            let f = gx - y;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = f / (1.0 + h * dw);
            let mut next = x - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-17 || hi - lo <= 1e-16 {
                x = next;
                break;
            }
            x = next;
        }
        reduce_coord(x)
    }
}

/// Free-function form of [`GTilde::eval`].
pub fn gtilde_eval(a0: f64, alpha: f64, x: f64, d: usize) -> Result<(f64, f64)> {
    Ok(GTilde::new(a0, alpha, d)?.eval(x))
}

/// Peak location of `ψ`.
pub const PSI_PEAK: f64 = 9.0 / 16.0;
/// Peak value of `ψ`.
pub const PSI_HEIGHT: f64 = 2.0;

/// `ψ(s) = 2 (1 - t²)³`, `t = (s - 9/16) / θ`, zero for `|t| ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub theta: f64,
    /// Derivative bound used by every downstream inequality.
    pub m_psi: f64,
}

impl PsiSpec {
    /// Requires `0 < θ < l/2`.
    pub fn new(theta: f64, l: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < l / 2.0) {
            return Err(Error::OutOfRange(format!("theta = {theta} not in (0, l/2) for l = {l}")));
        }
        let mut spec = Self { theta, m_psi: 0.0 };
        spec.m_psi = 1.01 * spec.grid_max_derivative(100_001);
        Ok(spec)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let t = (s - PSI_PEAK) / self.theta;
        if t.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let u = 1.0 - t * t;
        (PSI_HEIGHT * u * u * u, -6.0 * PSI_HEIGHT * t * u * u / self.theta)
    }

    /// Observed `max |ψ'|` on a uniform grid over the support.
    pub fn grid_max_derivative(&self, points: usize) -> f64 {
        let lo = PSI_PEAK - self.theta;
        let step = 2.0 * self.theta / (points - 1) as f64;
        (0..points)
            .map(|i| self.eval(lo + i as f64 * step).1.abs())
            .fold(0.0, f64::max)
    }

    /// Closed-form `max |ψ'|`, attained at `t = 1/√5`.
    pub fn analytic_max_derivative(&self) -> f64 {
        192.0 / (25.0 * 5f64.sqrt() * self.theta)
    }
}

/// Free-function form of [`PsiSpec::eval`].
pub fn psi_eval(spec: &PsiSpec, s: f64) -> (f64, f64) {
    spec.eval(s)
}

/// Center of `φ`: `φ(1/4) = 0`, `φ'(1/4) = 1/2`.
pub const PHI_CENTER: f64 = 0.25;

/// `φ'` is the smoothstep interpolant through nodes in the normalized
/// variable `σ = (z - 1/4)/δ`:
///
/// | σ    | -1/4 | -1/8 | 0   | 1/8 | 1/4  | 1/2 | 3/4 |
/// |------|------|------|-----|-----|------|-----|-----|
/// | φ'   | 0    | A    | 1/2 | 1   | -3/4 | B   | 0   |
///
/// `A` and `B` are calibrated so that `φ` vanishes at both ends of the
/// support. Each piece is monotone, so `-3/4 ≤ φ' ≤ 1` holds whenever every
/// node value does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub delta: f64,
    /// Node positions in `σ`.
    pub nodes: Vec<f64>,
    /// `φ'` at the nodes.
    pub values: Vec<f64>,
    /// `Φ(σ_i) = φ/δ` at the nodes.
    pub cumulative: Vec<f64>,
}

impl PhiSpec {
    /// Requires `0 < δ < 2θ`.
    pub fn new(delta: f64, theta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 2.0 * theta) {
            return Err(Error::OutOfRange(format!("delta = {delta} not in (0, 2 theta)")));
        }
        let nodes = vec![-0.25, -0.125, 0.0, 0.125, 0.25, 0.5, 0.75];
        let mut values = vec![0.0, f64::NAN, 0.5, 1.0, -0.75, f64::NAN, 0.0];
        // piece integral is width * (v_i + v_{i+1}) / 2, linear in each free amplitude
        let piece = |i: usize, v: &[f64]| (nodes[i + 1] - nodes[i]) * (v[i] + v[i + 1]) / 2.0;
        let solve = |free: usize, pieces: std::ops::Range<usize>, v: &mut Vec<f64>| {
            let mut at = |x: f64| {
                v[free] = x;
                pieces.clone().map(|i| piece(i, v)).sum::<f64>()
            };
            let f0 = at(0.0);
            let f1 = at(1.0);
            f0 / (f0 - f1)
        };
        values[1] = solve(1, 0..2, &mut values);
        values[5] = solve(5, 2..6, &mut values);
        for (i, &v) in values.iter().enumerate() {
            if !(-0.75..=1.0).contains(&v) {
                return Err(Error::Construction(format!(
                    "phi calibration put node {i} at {v}, outside [-3/4, 1]"
                )));
            }
        }
        let mut cumulative = vec![0.0; nodes.len()];
        for i in 0..nodes.len() - 1 {
            cumulative[i + 1] = cumulative[i] + piece(i, &values);
        }
        let zero = cumulative[2];
        for c in &mut cumulative {
            *c -= zero;
        }
        Ok(Self { delta, nodes, values, cumulative })
    }

    /// Support of `φ'` in `z`.
    pub fn support(&self) -> (f64, f64) {
        (
            PHI_CENTER + self.delta * self.nodes[0],
            PHI_CENTER + self.delta * self.nodes[self.nodes.len() - 1],
        )
    }

    /// Piece index and local parameter for normalized `σ` inside the support.
    #[inline]
    pub(crate) fn piece(&self, sigma: f64) -> Option<(usize, f64)> {
        let last = self.nodes.len() - 1;
        if sigma <= self.nodes[0] || sigma >= self.nodes[last] {
            return None;
        }
        let i = self.nodes[..last].iter().rposition(|&s| s <= sigma).unwrap_or(0);
        let w = self.nodes[i + 1] - self.nodes[i];
        Some((i, (sigma - self.nodes[i]) / w))
    }

    /// `(φ(z), φ'(z))`.
    #[inline]
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let sigma = (z - PHI_CENTER) / self.delta;
        match self.piece(sigma) {
            None => {
                let end = if sigma <= self.nodes[0] {
                    self.cumulative[0]
                } else {
                    self.cumulative[self.cumulative.len() - 1]
                };
                (self.delta * end, 0.0)
            }
            Some((i, t)) => {
                let w = self.nodes[i + 1] - self.nodes[i];
                let dv = self.values[i + 1] - self.values[i];
                let big = self.cumulative[i] + w * (self.values[i] * t + dv * smoothstep::integral(t));
                (self.delta * big, self.values[i] + dv * smoothstep::value(t))
            }
        }
    }

    /// `φ''(z)`.
    pub fn second_derivative(&self, z: f64) -> f64 {
        let sigma = (z - PHI_CENTER) / self.delta;
        match self.piece(sigma) {
            None => 0.0,
            Some((i, t)) => {
                let w = self.nodes[i + 1] - self.nodes[i];
                let dv = self.values[i + 1] - self.values[i];
                dv * smoothstep::d1(t) / (w * self.delta)
            }
        }
    }
}

/// Free-function form of [`PhiSpec::eval`].
pub fn phi_eval(spec: &PhiSpec, z: f64) -> (f64, f64) {
    spec.eval(z)
}

/// Radial cutoff `χ(x~)` around `p~`: 1 for `|x~ - p~| ≤ inner`, 0 beyond
/// `outer`, smoothstep in between. Keeps the vertical surgery supported inside
/// the surgery ball so the singular map stays continuous on its boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCutoff {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl BallCutoff {
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::OutOfRange("cutoff radii must satisfy 0 < inner < outer".into()));
        }
        Ok(Self { center, inner, outer })
    }

    /// `χ` and `∇χ` (written into `grad`).
    #[inline]
    pub fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut rho2 = 0.0;
        for (g, (&xi, &ci)) in grad.iter_mut().zip(x.iter().zip(&self.center)) {
            let d = arc_diff(ci, xi);
            *g = d;
            rho2 += d * d;
        }
        let rho = rho2.sqrt();
        if rho <= self.inner {
            grad.iter_mut().for_each(|g| *g = 0.0);
            1.0
        } else if rho >= self.outer {
            grad.iter_mut().for_each(|g| *g = 0.0);
            0.0
        } else {
            let w = self.outer - self.inner;
            let t = (rho - self.inner) / w;
            let scale = -smoothstep::d1(t) / (w * rho);
            grad.iter_mut().for_each(|g| *g *= scale);
            1.0 - smoothstep::value(t)
        }
    }

    pub fn gradient_bound(&self) -> f64 {
        smoothstep::D1_MAX / (self.outer - self.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central difference of a scalar function.
    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    /// Symbolic evaluation of `1 - S(t)` and `-S'(t)/r` from the monomial
    /// coefficients, independent of the Horner forms above.
    fn bump_oracle(t: f64, r: f64) -> (f64, f64) {
        let s = 6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3);
        let ds = 30.0 * t.powi(4) - 60.0 * t.powi(3) + 30.0 * t.powi(2);
        (1.0 - s, -ds / r)
    }

    #[test]
    fn bump_examples() {
        let r = 0.024;
        let b = BumpSpec::new(0.3, r).unwrap();
        assert_eq!(b.eval(0.3), (1.0, 0.0));
        let (v, d) = b.eval(0.3 + 2.0 * r);
        assert!(v < 1e-15 && d.abs() < 1e-9);
        let (v, d) = b.eval(0.3 + 1.5 * r);
        let (ov, od) = bump_oracle(0.5, r);
        assert_relative_eq!(ov, 0.5, epsilon = 1e-15);
        assert_relative_eq!(od, -1.875 / r, max_relative = 1e-14);
        assert_relative_eq!(v, ov, epsilon = 1e-12);
        assert_relative_eq!(d, od, max_relative = 1e-9);
        assert!(BumpSpec::new(0.0, 0.0).is_err());
        assert!(bump_eval(&BumpSpec { center: 0.0, r: -1.0 }, 0.0).is_err());
    }

    #[test]
    fn bump_invariants_on_grid() {
        let b = BumpSpec::new(0.0, 0.05).unwrap();
        for i in 0..=10_000 {
            let x = -0.2 + 0.4 * i as f64 / 10_000.0;
            let (v, d) = b.eval(x);
            assert!((0.0..=1.0).contains(&v));
            assert!(d.abs() < 2.0 / b.r);
            if x.abs() <= b.r {
                assert_eq!(v, 1.0);
            }
            if x.abs() >= 2.0 * b.r {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn slice_u_examples() {
        let r = 0.024;
        let c = 0.15;
        let layout = SliceLayout::new(vec![0.0, c, 0.3], r, 2).unwrap();
        let (v, g) = layout.eval(&[c, c]);
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (v, g) = layout.eval(&[0.9, -0.5]);
        assert_eq!((v, g), (0.0, vec![0.0, 0.0]));
        // product rule on the bump oracle
        let (v, g) = layout.eval(&[c + 1.5 * r, c]);
        let (ov, od) = bump_oracle(0.5, r);
        assert_relative_eq!(v, ov, epsilon = 1e-12);
        assert_relative_eq!(g[0], od, max_relative = 1e-9);
        assert_eq!(g[1], 0.0);
        assert_eq!(layout.locate(&[c, c]), (Some(1), Zone::Core));
        assert_eq!(layout.locate(&[c + 1.5 * r, c]), (Some(1), Zone::Transition));
        assert_eq!(layout.locate(&[-0.75, 0.0]), (None, Zone::Outside));
    }

    #[test]
    fn overlapping_slices_rejected() {
        assert!(matches!(
            SliceLayout::new(vec![0.0, 0.05], 0.02, 1),
            Err(Error::OverlappingSlices(0, 1))
        ));
    }

    #[test]
    fn u_gradient_bound() {
        let layout = SliceLayout::new(vec![0.0, 0.5], 0.03, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = [rng.gen_range(-0.07..0.07), rng.gen_range(-0.07..0.07)];
            let (_, g) = layout.eval(&x);
            assert!(g.iter().all(|d| d.abs() < 2.0 / layout.r));
        }
    }

    #[test]
    fn g_a_examples() {
        let (a, alpha) = (0.1, 0.5);
        assert_eq!(g_a_eval(a, alpha, 0.0, 2).unwrap(), 0.0);
        assert_relative_eq!(g_a_eval(a, alpha, a, 2).unwrap(), (1.0 + alpha / 2.0) * a, epsilon = 1e-15);
        assert_relative_eq!(g_a_eval(a, alpha, 1.0, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(g_a_eval(a, alpha, -1.0, 2).unwrap(), -1.0, epsilon = 1e-15);
        assert!(g_a_eval(0.2, alpha, 0.0, 2).is_err());
        assert!(g_a_eval(a, 0.0, 0.0, 2).is_err());
        let g = PiecewiseLinearG::new(a, alpha, 2).unwrap();
        assert!(g.outer_slope() < 1.0);
        // continuity at the kinks
        assert_relative_eq!(g.eval(a - 1e-12), g.eval(a + 1e-12), epsilon = 1e-10);
    }

    #[test]
    fn g_a_monotone_bijection() {
        for &(a, alpha, d) in &[(0.1, 0.5, 2usize), (0.2, 1.0, 1), (0.01, 0.01, 5)] {
            let g = PiecewiseLinearG::new(a, alpha, d).unwrap();
            let mut prev = g.eval(-1.0);
            assert_relative_eq!(prev, -1.0, epsilon = 1e-15);
            for i in 1..=100_000 {
                let x = -1.0 + 2.0 * i as f64 / 100_000.0;
                let v = g.eval(x);
                assert!(v > prev);
                prev = v;
            }
            assert_relative_eq!(prev, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gtilde_examples() {
        let alpha = 0.2;
        let d = 2;
        let a0 = 1.0 / 16.0;
        let (v, dv) = gtilde_eval(a0, alpha, 0.0, d).unwrap();
        assert_eq!(v, 0.0);
        assert_relative_eq!(dv, 1.0 + alpha / 2.0, epsilon = 1e-15);
        let (_, d5) = gtilde_eval(a0, alpha, 0.5, d).unwrap();
        assert!(d5 < 1.0);
        let g = GTilde::new(a0, alpha, d).unwrap();
        assert_eq!(g.eval(-1.0).0, -1.0);
        let mut worst: f64 = 0.0;
        for i in 0..100_000 {
            let x = -1.0 + 2.0 * i as f64 / 100_000.0;
            let (gx, dg) = g.eval(x);
            worst = worst.max(arc_len(gx, x));
            assert!(dg.abs() <= 1.0 + alpha / 2.0 + 1e-15);
            if x.abs() >= 2.0 * a0 {
                assert!(dg < 1.0);
            }
        }
        assert!(worst < alpha / 2.0);
        assert!(GTilde::new(0.2, alpha, 1).is_err());
        assert!(GTilde::new(a0, 0.0, 1).is_err());
    }

    #[test]
    fn gtilde_tracks_g_a_outside_the_zone() {
        let g = GTilde::new(0.05, 0.3, 2).unwrap();
        let lin = PiecewiseLinearG::new(g.equivalent_a(), 0.3, 2).unwrap();
        for i in 0..1000 {
            let x = 0.2 + 0.8 * i as f64 / 1000.0;
            assert_relative_eq!(g.eval(x).0, lin.eval(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn gtilde_inverse_roundtrip() {
        let g = GTilde::new(1.0 / 16.0, 0.3, 2).unwrap();
        for i in 0..20_000 {
            let x = -1.0 + 2.0 * i as f64 / 20_000.0;
            let y = g.eval(x).0;
            assert!(arc_len(g.inverse(y), x) < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn psi_examples() {
        let theta = 0.04;
        let psi = PsiSpec::new(theta, 0.1).unwrap();
        assert_eq!(psi.eval(PSI_PEAK), (2.0, 0.0));
        assert_eq!(psi.eval(PSI_PEAK + theta), (0.0, 0.0));
        // symbolic oracle at t = 1/√5
        let t = 1.0 / 5f64.sqrt();
        let (v, d) = psi.eval(PSI_PEAK + theta / 5f64.sqrt());
        assert_relative_eq!(v, 2.0 * (1.0 - t * t).powi(3), max_relative = 1e-12);
        assert_relative_eq!(v, 128.0 / 125.0, max_relative = 1e-12);
        assert_relative_eq!(d, -12.0 * t * (1.0 - t * t).powi(2) / theta, max_relative = 1e-12);
        assert!(psi.m_psi >= psi.grid_max_derivative(100_000));
        assert_relative_eq!(psi.m_psi / 1.01, psi.analytic_max_derivative(), max_relative = 1e-6);
        assert!(PsiSpec::new(0.06, 0.1).is_err());
        // evenness
        for i in 0..100 {
            let s = theta * i as f64 / 100.0;
            assert_eq!(psi.eval(PSI_PEAK + s).0, psi.eval(PSI_PEAK - s).0);
        }
    }

    #[test]
    fn phi_pinned_nodes() {
        let delta = 5e-4;
        let phi = PhiSpec::new(delta, 0.04).unwrap();
        let (v, d) = phi.eval(0.25);
        assert!(v.abs() < 1e-18);
        assert_eq!(d, 0.5);
        assert_relative_eq!(phi.eval(0.25 + delta / 8.0).1, 1.0, epsilon = 1e-9);
        assert_relative_eq!(phi.eval(0.25 + delta / 4.0).1, -0.75, epsilon = 1e-9);
        assert_relative_eq!(phi.values[1], -0.25, epsilon = 1e-15);
        assert_relative_eq!(phi.values[5], -1.0 / 16.0, epsilon = 1e-15);
        let (lo, hi) = phi.support();
        assert!(phi.eval(lo).0.abs() < 1e-18);
        assert!(phi.eval(hi).0.abs() < 1e-18);
        assert!(phi.eval(lo - 0.1).0.abs() < 1e-18);
        assert!(PhiSpec::new(0.1, 0.04).is_err());
    }

    #[test]
    fn phi_bounds_on_fine_grid() {
        let delta = 5e-4;
        let phi = PhiSpec::new(delta, 0.04).unwrap();
        let (lo, hi) = phi.support();
        let n = 1_000_000;
        for i in 0..=n {
            let z = lo - 1e-5 + (hi - lo + 2e-5) * i as f64 / n as f64;
            let (v, d) = phi.eval(z);
            assert!(v.abs() <= delta);
            assert!((-0.75 - 1e-12..=1.0 + 1e-12).contains(&d));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bump = BumpSpec::new(0.1, 0.024).unwrap();
        let g = GTilde::new(1.0 / 16.0, 0.2, 2).unwrap();
        let psi = PsiSpec::new(0.04, 0.1).unwrap();
        let delta = 5e-4;
        let phi = PhiSpec::new(delta, 0.04).unwrap();
        let h = 1e-7;
        let check = |reported: f64, numeric: f64, scale: f64| {
            let err = (reported - numeric).abs() / scale.max(reported.abs()).max(1e-300);
            assert!(err < 1e-5, "reported {reported}, fd {numeric}");
        };
        for _ in 0..1_000_000 {
            let x = rng.gen_range(0.1 - 0.06..0.1 + 0.06);
            check(bump.eval(x).1, fd(|t| bump.eval(t).0, x, h), 1.0 / bump.r);
            let x = rng.gen_range(-0.9..0.9);
            check(g.eval(x).1, fd(|t| t + 0.1 * g.w(t).0, x, h), 1.0);
            let s = rng.gen_range(PSI_PEAK - 0.05..PSI_PEAK + 0.05);
            check(psi.eval(s).1, fd(|t| psi.eval(t).0, s, h), psi.m_psi);
            let z = rng.gen_range(0.25 - delta..0.25 + delta);
            // φ varies on a scale of δ/8, so use a proportionally smaller step
            check(phi.eval(z).1, fd(|t| phi.eval(t).0, z, delta * 1e-4), 1.0);
        }
    }

    #[test]
    fn cutoff_is_one_inside_and_zero_outside() {
        let cut = BallCutoff::new(vec![-0.75, 0.0], 0.025, 0.05).unwrap();
        let mut g = [0.0; 2];
        assert_eq!(cut.eval(&[-0.75, 0.01], &mut g), 1.0);
        assert_eq!(g, [0.0, 0.0]);
        assert_eq!(cut.eval(&[-0.75, 0.06], &mut g), 0.0);
        let x = [-0.75 + 0.03, 0.02];
        let v = cut.eval(&x, &mut g);
        assert!(v > 0.0 && v < 1.0);
        let h = 1e-7;
        let mut scratch = [0.0; 2];
        let num = (cut.eval(&[x[0] + h, x[1]], &mut scratch) - cut.eval(&[x[0] - h, x[1]], &mut scratch)) / (2.0 * h);
        assert_relative_eq!(g[0], num, max_relative = 1e-5);
    }
}
