//! Iterated function systems on `T^d`: the shrinking family `F2`, the
//! minimal pair `F1`, greedy orbit branches, and preimage inradius growth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::profiles::GTilde;
use crate::torus::{arc_len, dist_raw, reduce_coord, Box as TorusBox};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    ShrinkingFamily,
    MinimalPair,
}

/// A coordinatewise circle diffeomorphism of `T^d`. All members have diagonal
/// Jacobians and are monotone on every axis, which makes box preimages exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Member {
    /// `x_j ↦ g~(x_j - t) + t` on every axis.
    Shrinking { g: GTilde, shift: f64 },
    /// `x ↦ x + v`.
    Translation { v: Vec<f64> },
    /// `x ↦ N(x + w)` with `N_j(y) = y - η sin(π y + phase_j)`.
    NorthSouth { w: Vec<f64>, eta: f64, phase: Vec<f64> },
}

impl Member {
    /// Lifted displacement `member(x) - x` (no reduction) and the diagonal of
    /// the Jacobian.
    #[inline]
    pub fn displacement_diag(&self, x: &[f64], disp: &mut [f64], diag: &mut [f64]) {
        use std::f64::consts::PI;
        match self {
            Member::Shrinking { g, shift } => {
                let h = 0.5 * g.alpha;
                for j in 0..x.len() {
                    let (w, dw) = g.w(x[j] - shift);
                    disp[j] = h * w;
                    diag[j] = 1.0 + h * dw;
                }
            }
            Member::Translation { v } => {
                disp[..x.len()].copy_from_slice(v);
                diag[..x.len()].fill(1.0);
            }
            Member::NorthSouth { w, eta, phase } => {
                for j in 0..x.len() {
                    let arg = PI * (x[j] + w[j]) + phase[j];
                    disp[j] = w[j] - eta * arg.sin();
                    diag[j] = 1.0 - eta * PI * arg.cos();
                }
            }
        }
    }

    /// Evaluates the member and writes the diagonal of its Jacobian.
    #[inline]
    pub fn eval_diag(&self, x: &[f64], out: &mut [f64], diag: &mut [f64]) {
        self.displacement_diag(x, out, diag);
        for j in 0..x.len() {
            out[j] = reduce_coord(x[j] + out[j]);
        }
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let mut diag = [0.0; 16];
        if x.len() <= 16 {
            self.eval_diag(x, out, &mut diag[..x.len()]);
        } else {
            let mut diag = vec![0.0; x.len()];
            self.eval_diag(x, out, &mut diag);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn jacobian_diag(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut diag = vec![0.0; x.len()];
        self.eval_diag(x, &mut out, &mut diag);
        diag
    }

    /// Inverse of the `j`-th coordinate map.
    pub fn inverse_coord(&self, j: usize, y: f64) -> f64 {
        match self {
            Member::Shrinking { g, shift } => reduce_coord(g.inverse(y - shift) + shift),
            Member::Translation { v } => reduce_coord(y - v[j]),
            Member::NorthSouth { w, eta, phase } => {
                let z = invert_north_south(*eta, phase[j], reduce_coord(y));
                reduce_coord(z - w[j])
            }
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        (0..y.len()).map(|j| self.inverse_coord(j, y[j])).collect()
    }

    /// Rigorous bound on `sup ‖x - member(x)‖_∞`.
    pub fn displacement_bound(&self) -> f64 {
        match self {
            Member::Shrinking { g, .. } => 0.5 * g.alpha * shrinking_w_bound(g),
            Member::Translation { v } => v.iter().fold(0.0f64, |a, &b| a.max(b.abs())),
            Member::NorthSouth { w, eta, .. } => w.iter().fold(0.0f64, |a, &b| a.max(b.abs())) + eta,
        }
    }

    /// Bound on the operator norm of the Jacobian.
    pub fn jacobian_norm_bound(&self) -> f64 {
        match self {
            Member::Shrinking { g, .. } => g.max_slope(),
            Member::Translation { .. } => 1.0,
            Member::NorthSouth { eta, .. } => 1.0 + eta * std::f64::consts::PI,
        }
    }

    /// Bound on `sup ‖Id - Dmember‖`.
    pub fn jacobian_deviation_bound(&self) -> f64 {
        match self {
            Member::Shrinking { g, .. } => 0.5 * g.alpha * g.c.max(1.0),
            Member::Translation { .. } => 0.0,
            Member::NorthSouth { eta, .. } => eta * std::f64::consts::PI,
        }
    }

    /// Per-axis arc where the member expands, if any.
    pub fn expanding_arc(&self) -> Option<(f64, f64)> {
        match self {
            Member::Shrinking { g, shift } => Some((*shift, 2.0 * g.a0)),
            _ => None,
        }
    }
}

/// `|w| ≤ 3a0/2`: `w ≤ x` (as `B ≤ x`) and `w ≤ (1+c)·3a0/2 - c·x`, and the
/// two lines cross at `x = 3a0/2`.
fn shrinking_w_bound(g: &GTilde) -> f64 {
    1.5 * g.a0
}

fn invert_north_south(eta: f64, phase: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    // N is an increasing lift with |N(z) - z| ≤ η
    let (mut lo, mut hi) = (y - eta, y + eta);
    let mut z = y;
    for _ in 0..100 {
        let arg = PI * z + phase;
        let f = z - eta * arg.sin() - y;
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let mut next = z - f / (1.0 - eta * PI * arg.cos());
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-17 || hi - lo <= 1e-16 {
            return next;
        }
        z = next;
    }
    z
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapFamily {
    pub d: usize,
    pub members: Vec<Member>,
    pub role: Role,
    /// `max ‖Id - member‖_∞` over the members (the recorded `M` for a minimal pair).
    pub max_displacement: f64,
}

impl MapFamily {
    pub fn new(d: usize, members: Vec<Member>, role: Role) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if members.is_empty() {
            return Err(Error::Construction("a family needs at least one member".into()));
        }
        for m in &members {
            let ok = match m {
                Member::Shrinking { .. } => true,
                Member::Translation { v } => v.len() == d,
                Member::NorthSouth { w, phase, eta } => {
                    w.len() == d && phase.len() == d && *eta >= 0.0 && eta * std::f64::consts::PI < 1.0
                }
            };
            if !ok {
                return Err(Error::Construction("member does not act on T^d".into()));
            }
        }
        let max_displacement = members.iter().map(Member::displacement_bound).fold(0.0, f64::max);
        Ok(Self { d, members, role, max_displacement })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `Σ (‖Dm‖ - 1)²` over the members.
    pub fn jacobian_slack(&self) -> f64 {
        self.members
            .iter()
            .map(|m| {
                let e = m.jacobian_norm_bound() - 1.0;
                e * e
            })
            .sum()
    }
}

/// Default smoothing width for `F2` on `T^d`.
pub fn default_a0(d: usize) -> f64 {
    1.0 / (8.0 * d as f64)
}

/// The `d + 1` near-contractions `g_i(x) = g(x - t_i) + t_i`, `t_i = 2i/(d+1)`.
pub fn build_f2(d: usize, alpha: f64) -> Result<MapFamily> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    build_f2_with_a0(d, alpha, default_a0(d))
}

/// [`build_f2`] with an explicit smoothing width `a0 ≤ 1/(8d)`.
pub fn build_f2_with_a0(d: usize, alpha: f64, a0: f64) -> Result<MapFamily> {
    let g = GTilde::new(a0, alpha, d)?;
    let members: Vec<Member> = (0..=d)
        .map(|i| Member::Shrinking { g, shift: reduce_coord(2.0 * i as f64 / (d + 1) as f64) })
        .collect();
    // expanding arcs have half-width 2 a0 and must not meet on the circle
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let (ci, wi) = members[i].expanding_arc().unwrap();
            let (cj, wj) = members[j].expanding_arc().unwrap();
            if arc_len(ci, cj) <= wi + wj {
                return Err(Error::Construction(format!("expanding zones of g_{i} and g_{j} overlap")));
            }
        }
    }
    MapFamily::new(d, members, Role::ShrinkingFamily)
}

/// Default Jacobian slack for [`build_f1`].
pub const DEFAULT_JAC_SLACK: f64 = 0.05;

const GOLDEN: f64 = 1.618_033_988_749_895;

/// Square roots of squarefree integers coprime to 5, used to extend the
/// golden direction: together with `1` and `γ` they are linearly independent
/// over the rationals (the powers `γ^j` are not, since `γ² = γ + 1`).
const EXTRA_SQRTS: [f64; 8] = [2.0, 3.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0];

/// Totally irrational unit direction in `R^d`.
pub fn irrational_direction(d: usize) -> Result<Vec<f64>> {
    if d == 0 || d > EXTRA_SQRTS.len() + 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut v = vec![1.0];
    if d >= 2 {
        v.push(GOLDEN);
    }
    v.extend(EXTRA_SQRTS.iter().take(d.saturating_sub(2)).map(|s| s.sqrt()));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// Minimal-pair stand-in: a translation along a totally irrational direction
/// and a north-south map composed with a second, non-parallel translation.
pub fn build_f1(d: usize, m_target: f64, seed: u64) -> Result<MapFamily> {
    build_f1_with_slack(d, m_target, DEFAULT_JAC_SLACK, seed)
}

pub fn build_f1_with_slack(d: usize, m_target: f64, jac_slack: f64, seed: u64) -> Result<MapFamily> {
    use std::f64::consts::PI;
    if !(m_target > 0.0) {
        return Err(Error::OutOfRange(format!("M_target = {m_target} must be positive")));
    }
    if !(jac_slack > 0.0) {
        return Err(Error::OutOfRange(format!("jac_slack = {jac_slack} must be positive")));
    }
    let u0 = irrational_direction(d)?;
    let v: Vec<f64> = u0.iter().map(|c| m_target * c).collect();
    let u1: Vec<f64> = if d == 1 {
        vec![-1.0]
    } else {
        // reversed with alternating signs: orthogonal-ish and never parallel to u0
        (0..d).map(|j| if j % 2 == 0 { u0[d - 1 - j] } else { -u0[d - 1 - j] }).collect()
    };
    let w: Vec<f64> = u1.iter().map(|c| 0.5 * m_target * c).collect();
    let eta = (0.9 * jac_slack.sqrt() / PI).min(0.5 * m_target).min(0.9 / PI);
    let mut rng = exec::rng_for(seed, 0xF1);
    let phase: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let fam = MapFamily::new(
        d,
        vec![Member::Translation { v }, Member::NorthSouth { w, eta, phase }],
        Role::MinimalPair,
    )?;
    debug_assert!(fam.max_displacement <= m_target * (1.0 + 1e-12));
    debug_assert!(fam.jacobian_slack() < jac_slack);
    Ok(fam)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    Reached,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchTrace {
    pub start: Vec<f64>,
    /// `(member index, point after applying it)`.
    pub steps: Vec<(usize, Vec<f64>)>,
    pub status: SearchStatus,
    pub final_distance: f64,
}

impl BranchTrace {
    pub fn endpoint(&self) -> &[f64] {
        self.steps.last().map(|s| s.1.as_slice()).unwrap_or(&self.start)
    }

    /// Re-applies the recorded member sequence to the start point.
    pub fn replay(&self, fam: &MapFamily) -> Vec<f64> {
        let mut x = self.start.clone();
        let mut y = x.clone();
        for (i, _) in &self.steps {
            fam.members[*i].eval_into(&x, &mut y);
            std::mem::swap(&mut x, &mut y);
        }
        x
    }
}

/// Greedy branch towards `target`: each step applies the member whose image is
/// closest to the target. When no member gets closer (e.g. an identity member
/// would win forever) the closest image among members that actually move the
/// point is taken instead.
pub fn ifs_branch_greedy(fam: &MapFamily, x: &[f64], target: &[f64], eps: f64, budget: usize) -> BranchTrace {
    let mut cur: Vec<f64> = x.iter().map(|&c| reduce_coord(c)).collect();
    let start = cur.clone();
    let mut dist = dist_raw(&cur, target);
    let mut steps = Vec::new();
    let mut imgs: Vec<Vec<f64>> = vec![vec![0.0; x.len()]; fam.len()];
    while dist >= eps && steps.len() < budget {
        let mut best: Option<(usize, f64)> = None;
        let mut best_mover: Option<(usize, f64)> = None;
        for (i, m) in fam.members.iter().enumerate() {
            m.eval_into(&cur, &mut imgs[i]);
            let d = dist_raw(&imgs[i], target);
            if best.is_none_or(|b| d < b.1) {
                best = Some((i, d));
            }
            if dist_raw(&imgs[i], &cur) > 0.0 && best_mover.is_none_or(|b| d < b.1) {
                best_mover = Some((i, d));
            }
        }
        let (mut pick, mut d) = best.unwrap();
        if d >= dist {
            match best_mover {
                Some(b) => (pick, d) = b,
                None => break,
            }
        }
        cur.copy_from_slice(&imgs[pick]);
        dist = d;
        steps.push((pick, cur.clone()));
    }
    let status = if dist < eps { SearchStatus::Reached } else { SearchStatus::Exhausted };
    BranchTrace { start, steps, status, final_distance: dist }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InradiusStep {
    pub step: usize,
    pub member: usize,
    pub inradius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InradiusTrace {
    pub threshold: f64,
    pub initial: f64,
    pub steps: Vec<InradiusStep>,
    pub status: SearchStatus,
    /// The box reached at the end.
    pub final_box: TorusBox,
}

impl InradiusTrace {
    pub fn final_inradius(&self) -> f64 {
        self.steps.last().map_or(self.initial, |s| s.inradius)
    }

    /// Whether the inradius never decreased before first exceeding the threshold.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial;
        for s in &self.steps {
            if prev > self.threshold {
                break;
            }
            if s.inradius < prev {
                return false;
            }
            prev = s.inradius;
        }
        true
    }
}

/// Safety margin subtracted from each preimage endpoint to absorb the
/// inverse's rounding.
const INVERSE_TOL: f64 = 1e-14;

/// Exact preimage of an axis-aligned box under a coordinatewise monotone
/// member, shrunk by a rounding margin. `None` if it degenerates.
pub fn member_preimage(member: &Member, b: &TorusBox) -> Option<TorusBox> {
    let d = b.dim();
    let mut center = Vec::with_capacity(d);
    let mut half = Vec::with_capacity(d);
    for j in 0..d {
        let h = b.half_widths[j];
        if h >= 1.0 {
            center.push(b.center[j]);
            half.push(1.0);
            continue;
        }
        let lo = member.inverse_coord(j, b.center[j] - h);
        let hi = member.inverse_coord(j, b.center[j] + h);
        let width = (hi - lo).rem_euclid(2.0);
        let hw = 0.5 * width - INVERSE_TOL;
        if !(hw > 0.0) {
            return None;
        }
        center.push(reduce_coord(lo + 0.5 * width));
        half.push(hw.min(1.0));
    }
    Some(TorusBox { center, half_widths: half })
}

/// Inradius threshold `√d / (d + 1)`.
pub fn inradius_threshold(d: usize) -> f64 {
    (d as f64).sqrt() / (d as f64 + 1.0)
}

/// Greedy backward iteration: at every step take the member preimage with the
/// largest inradius, until the inradius exceeds `√d/(d+1)` or `p_max` steps.
pub fn preimage_inradius_growth(fam: &MapFamily, w: &TorusBox, p_max: usize) -> Result<InradiusTrace> {
    if fam.role != Role::ShrinkingFamily {
        return Err(Error::WrongRole);
    }
    if w.dim() != fam.d {
        return Err(Error::DimensionMismatch { expected: fam.d, got: w.dim() });
    }
    if !(w.inradius() > 0.0) {
        return Err(Error::OutOfRange("box must have positive inradius".into()));
    }
    let threshold = inradius_threshold(fam.d);
    let mut cur = w.clone();
    let mut steps = Vec::new();
    while cur.inradius() <= threshold && steps.len() < p_max {
        let best = fam
            .members
            .iter()
            .enumerate()
            .filter_map(|(i, m)| member_preimage(m, &cur).map(|b| (i, b)))
            .max_by(|a, b| a.1.inradius().total_cmp(&b.1.inradius()));
        let Some((i, b)) = best else { break };
        cur = b;
        steps.push(InradiusStep { step: steps.len() + 1, member: i, inradius: cur.inradius() });
    }
    let status = if cur.inradius() > threshold { SearchStatus::Reached } else { SearchStatus::Exhausted };
    Ok(InradiusTrace { threshold, initial: w.inradius(), steps, status, final_box: cur })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityTrial {
    pub seed: u64,
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    pub steps: usize,
    pub final_distance: f64,
    pub reached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub eps: f64,
    pub budget: usize,
    pub trials: Vec<MinimalityTrial>,
    pub pass: bool,
}

/// Runs greedy branches between random (start, target) pairs.
pub fn minimality_probe(fam: &MapFamily, eps: f64, trials: usize, budget: usize, seed: u64) -> Result<MinimalityReport> {
    if !(eps > 0.0) {
        return Err(Error::OutOfRange("epsilon must be positive".into()));
    }
    let d = fam.d;
    let results = exec::map_indexed(trials, |t| {
        let trial_seed = exec::sub_seed(seed, t as u64);
        let mut rng = exec::rng_for(trial_seed, 0);
        let start: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trace = ifs_branch_greedy(fam, &start, &target, eps, budget);
        MinimalityTrial {
            seed: trial_seed,
            start,
            target,
            steps: trace.steps.len(),
            final_distance: trace.final_distance,
            reached: trace.status == SearchStatus::Reached,
        }
    });
    let pass = results.iter().all(|t| t.reached);
    Ok(MinimalityReport { eps, budget, trials: results, pass })
}
