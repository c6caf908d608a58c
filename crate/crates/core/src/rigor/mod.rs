//! Certification of the key inequalities by outward-rounded interval
//! arithmetic and adaptive bisection.
//!
//! A certificate covers a region by a tree of boxes. A leaf is certified when
//! the interval enclosure proves the strict inequality on the whole box,
//! refuted when a point witness violates it, and undecided otherwise.

pub mod enclose;
pub mod interval;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::endo::{Construction, EndoMap, MapKind, TorusMap};
use crate::exec;
use crate::tangent::{cone_ratio_raw, sample_cone_vector};
use enclose::IMatrix;
pub use interval::Interval;

pub type IntervalBox = Vec<Interval>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    /// Every closed-cone vector maps to central/unstable ratio `< kappa`.
    ConeRatio { kappa: f64 },
    /// `‖DF v‖ > factor ‖v‖` for every cone vector.
    Expansion { factor: f64 },
    /// The Jacobian determinant does not vanish.
    DetNonzero,
    /// `|φ(x_n)| ≤ δ`.
    PhiBound,
}

impl Predicate {
    pub fn id(&self) -> String {
        match self {
            Predicate::ConeRatio { kappa } => format!("cone-image-ratio < {kappa}"),
            Predicate::Expansion { factor } => format!("expansion > {factor}"),
            Predicate::DetNonzero => "det != 0".into(),
            Predicate::PhiBound => "|phi| <= delta".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CertRegion {
    Torus,
    /// Box hull of the surgery ball `B(p, l)`.
    Ball,
    /// Complement of the slice supports. For `m > 1` the whole torus is used,
    /// which is a superset.
    Complement,
    /// The slice supports `[c_i - 2r, c_i + 2r]^m × T^k`, cores included.
    Transition,
    Custom(Vec<IntervalBox>),
}

impl CertRegion {
    pub fn name(&self) -> &'static str {
        match self {
            CertRegion::Torus => "torus",
            CertRegion::Ball => "ball",
            CertRegion::Complement => "complement",
            CertRegion::Transition => "transition",
            CertRegion::Custom(_) => "custom",
        }
    }

    /// Boxes of canonical coordinates covering the region.
    pub fn boxes(&self, ctx: &Construction) -> Vec<IntervalBox> {
        let p = &ctx.params;
        let whole = Interval::new(-1.0, 1.0);
        match self {
            CertRegion::Torus => vec![vec![whole; p.n]],
            CertRegion::Ball => product(p.p.iter().map(|&c| arc_pieces(c - p.l, c + p.l)).collect()),
            CertRegion::Complement if p.m == 1 => {
                let mut arcs: Vec<(f64, f64)> = p.centers.iter().map(|&c| (c - 2.0 * p.r, c + 2.0 * p.r)).collect();
                arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut out = Vec::new();
                for i in 0..arcs.len() {
                    let start = arcs[i].1;
                    let end = if i + 1 < arcs.len() { arcs[i + 1].0 } else { arcs[0].0 + 2.0 };
                    for piece in arc_pieces(start, end) {
                        let mut b = vec![piece];
                        b.extend(std::iter::repeat_n(whole, p.k));
                        out.push(b);
                    }
                }
                out
            }
            CertRegion::Complement => vec![vec![whole; p.n]],
            CertRegion::Transition => {
                let mut out = Vec::new();
                for &c in &p.centers {
                    let mut axes: Vec<Vec<Interval>> = (0..p.m).map(|_| arc_pieces(c - 2.0 * p.r, c + 2.0 * p.r)).collect();
                    axes.extend(std::iter::repeat_n(vec![whole], p.k));
                    out.extend(product(axes));
                }
                out
            }
            CertRegion::Custom(b) => b.clone(),
        }
    }
}

/// Splits the arc `[a, b]` (with `b - a < 2`) into canonical intervals.
fn arc_pieces(a: f64, b: f64) -> Vec<Interval> {
    let shift = 2.0 * ((a + 1.0) * 0.5).floor();
    let (a, b) = (a - shift, b - shift);
    if b <= 1.0 {
        vec![Interval::new(a, b)]
    } else {
        vec![Interval::new(a, 1.0), Interval::new(-1.0, b - 2.0)]
    }
}

fn product(axes: Vec<Vec<Interval>>) -> Vec<IntervalBox> {
    axes.into_iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&iv| {
                    let mut b = prefix.clone();
                    b.push(iv);
                    b
                })
            })
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LeafStatus {
    Certified,
    Undecided,
    Refuted { witness: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub depth: usize,
    pub bounds: IntervalBox,
    /// Enclosure of the predicate's quantity on the leaf (ratio, expansion,
    /// determinant or `φ`).
    pub enclosure: Interval,
    pub status: LeafStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Certified,
    Undecided,
    Refuted,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::Undecided => "undecided",
            Verdict::Refuted => "refuted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateTrace {
    pub region: String,
    pub predicate: String,
    pub map: MapKind,
    pub max_depth: usize,
    /// Deepest level at which any leaf was settled or left open.
    pub depth_reached: usize,
    pub certified: usize,
    /// Certified leaf count per depth.
    pub certified_by_depth: Vec<usize>,
    /// Undecided and refuted leaves, with their enclosures.
    pub open: Vec<Leaf>,
    /// Hull of the quantity over every certified leaf.
    pub certified_hull: Option<Interval>,
    pub verdict: Verdict,
}

impl CertificateTrace {
    pub fn undecided(&self) -> usize {
        self.open.iter().filter(|l| l.status == LeafStatus::Undecided).count()
    }

    pub fn refuted(&self) -> usize {
        self.open.len() - self.undecided()
    }

    /// Structured text report: a key-value header and one line per open leaf.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "region: {}", self.region);
        let _ = writeln!(s, "predicate: {}", self.predicate);
        let _ = writeln!(s, "map: {:?}", self.map);
        let _ = writeln!(s, "max_depth: {}", self.max_depth);
        let _ = writeln!(s, "depth_reached: {}", self.depth_reached);
        let _ = writeln!(s, "leaves_certified: {}", self.certified);
        let _ = writeln!(s, "leaves_undecided: {}", self.undecided());
        let _ = writeln!(s, "leaves_refuted: {}", self.refuted());
        let by_depth: Vec<String> = self.certified_by_depth.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "certified_by_depth: {}", by_depth.join(","));
        if let Some(h) = self.certified_hull {
            let _ = writeln!(s, "certified_enclosure: {h}");
        }
        let _ = writeln!(s, "verdict: {}", self.verdict.as_str());
        for leaf in &self.open {
            let bx: Vec<String> = leaf.bounds.iter().map(|b| b.to_string()).collect();
            let status = match &leaf.status {
                LeafStatus::Certified => "certified".to_string(),
                LeafStatus::Undecided => "undecided".to_string(),
                LeafStatus::Refuted { witness } => format!("refuted at {witness:?}"),
            };
            let _ = writeln!(s, "leaf depth={} box={} enclosure={} {status}", leaf.depth, bx.join("x"), leaf.enclosure);
        }
        s
    }
}

/// Lower bound `L` on `|u'|` for unit `v_u` and `|v_c| ≤ κ`, and the squared
/// upper bound on `|c'|` over the same vectors.
fn cone_bounds(jac: &IMatrix, m: usize, kappa: f64) -> (Interval, Interval) {
    let n = jac.n;
    let frob = |it: &mut dyn Iterator<Item = Interval>| {
        it.fold(Interval::ZERO, |a, e| a + e.sqr()).sqrt().expect("sum of squares")
    };
    let diag_min = (0..m).map(|i| jac.get(i, i).abs().lo()).fold(f64::INFINITY, f64::min);
    let off = frob(&mut (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| jac.get(i, j)));
    let uc = frob(&mut (0..m).flat_map(|i| (m..n).map(move |j| (i, j))).map(|(i, j)| jac.get(i, j)));
    let lower = Interval::point(diag_min) - off - uc * kappa;
    let vu = Interval::new(-1.0, 1.0);
    let vc = Interval::new(-kappa, kappa);
    let mut c2 = Interval::ZERO;
    for a in m..n {
        let mut acc = Interval::ZERO;
        for j in 0..n {
            acc = acc + jac.get(a, j) * if j < m { vu } else { vc };
        }
        c2 = c2 + acc.sqr();
    }
    (Interval::new(lower.lo(), lower.lo()), c2)
}

/// Point test vectors on the cone boundary: unit `v_u` along each unstable
/// axis and `v_c = ±κ` along each central axis.
fn boundary_vectors(m: usize, n: usize, kappa: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..m {
        for b in m..n {
            for s in [-1.0, 1.0] {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v[b] = s * kappa;
                out.push(v);
            }
        }
    }
    out
}

fn mat_vec(j: &nalgebra::DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..j.nrows()).map(|r| (0..j.ncols()).map(|c| j[(r, c)] * v[c]).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Points at which a refutation is attempted: the center and the corners.
fn probe_points(b: &IntervalBox) -> Vec<Vec<f64>> {
    let n = b.len();
    let mut pts = vec![b.iter().map(|i| i.mid()).collect::<Vec<_>>()];
    if n <= 6 {
        for mask in 0..(1usize << n) {
            pts.push((0..n).map(|j| if mask >> j & 1 == 1 { b[j].hi() } else { b[j].lo() }).collect());
        }
    }
    pts
}

fn evaluate_leaf(f: &EndoMap, pred: Predicate, b: &IntervalBox) -> (Interval, LeafStatus) {
    let ctx = f.construction();
    let kind = f.kind();
    let p = &ctx.params;
    let (m, n) = (p.m, p.n);
    match pred {
        Predicate::ConeRatio { kappa } => {
            let jac = enclose::jacobian(ctx, kind, b);
            let (lower, c2) = cone_bounds(&jac, m, kappa);
            let ratio_hi = if lower.lo() > 0.0 {
                c2.sqrt().expect("square").div(&lower).map(|q| q.hi()).unwrap_or(f64::INFINITY)
            } else {
                f64::INFINITY
            };
            let enclosure = Interval::new(0.0, ratio_hi);
            let certified = lower.lo() > 0.0 && (lower.sqr() * (kappa * kappa) - c2).lo() > 0.0;
            if certified {
                return (enclosure, LeafStatus::Certified);
            }
            for x in probe_points(b) {
                let j = f.jacobian(&x);
                for v in boundary_vectors(m, n, kappa) {
                    if cone_ratio_raw(&mat_vec(&j, &v), m) >= kappa {
                        return (enclosure, LeafStatus::Refuted { witness: x });
                    }
                }
            }
            (enclosure, LeafStatus::Undecided)
        }
        Predicate::Expansion { factor } => {
            let kappa = p.kappa;
            let jac = enclose::jacobian(ctx, kind, b);
            let (lower, _) = cone_bounds(&jac, m, kappa);
            let scale = Interval::point(1.0 + kappa * kappa).sqrt().expect("positive");
            let exp_lo = if lower.lo() > 0.0 { lower.div(&scale).expect("positive").lo() } else { 0.0 };
            let enclosure = Interval::new(exp_lo, f64::INFINITY);
            let certified = lower.lo() > 0.0 && (lower.sqr() - scale.sqr() * (factor * factor)).lo() > 0.0;
            if certified {
                return (enclosure, LeafStatus::Certified);
            }
            for x in probe_points(b) {
                let j = f.jacobian(&x);
                for v in boundary_vectors(m, n, kappa) {
                    if norm(&mat_vec(&j, &v)) <= factor * norm(&v) {
                        return (enclosure, LeafStatus::Refuted { witness: x });
                    }
                }
            }
            (enclosure, LeafStatus::Undecided)
        }
        Predicate::DetNonzero => {
            let jac = enclose::jacobian(ctx, kind, b);
            let det = enclose::determinant(&jac).unwrap_or(Interval::new(f64::NEG_INFINITY, f64::INFINITY));
            if !det.contains_zero() {
                return (det, LeafStatus::Certified);
            }
            let dets: Vec<(Vec<f64>, f64)> = probe_points(b).into_iter().map(|x| {
                let d = f.jacobian(&x).determinant();
                (x, d)
            }).collect();
            // a strict sign change forces a zero in between
            let pos = dets.iter().find(|(_, d)| *d > 1e-9);
            let neg = dets.iter().find(|(_, d)| *d < -1e-9);
            match (pos, neg) {
                (Some((x, _)), Some(_)) => (det, LeafStatus::Refuted { witness: x.clone() }),
                _ => (det, LeafStatus::Undecided),
            }
        }
        Predicate::PhiBound => {
            let (phi, _) = enclose::phi(&ctx.phi, b[n - 1]);
            let d = p.delta;
            if phi.lo() >= -d && phi.hi() <= d {
                return (phi, LeafStatus::Certified);
            }
            for x in probe_points(b) {
                if ctx.phi.eval(x[n - 1]).0.abs() > d {
                    return (phi, LeafStatus::Refuted { witness: x });
                }
            }
            (phi, LeafStatus::Undecided)
        }
    }
}

fn bisect_widest(b: &IntervalBox) -> (IntervalBox, IntervalBox) {
    let j = (0..b.len()).max_by(|&a, &c| b[a].width().total_cmp(&b[c].width())).unwrap_or(0);
    let (l, r) = b[j].split();
    let mut left = b.clone();
    let mut right = b.clone();
    left[j] = l;
    right[j] = r;
    (left, right)
}

/// Bisects the region until every leaf is certified, refuted, or at
/// `max_depth`. Leaves are processed level by level, so the trace does not
/// depend on scheduling.
pub fn verify_inequality(
    ctx: &Arc<Construction>,
    kind: MapKind,
    predicate: Predicate,
    region: &CertRegion,
    max_depth: usize,
) -> CertificateTrace {
    let f = ctx.map(kind);
    let mut frontier = region.boxes(ctx);
    let mut certified_by_depth = Vec::new();
    let mut certified = 0;
    let mut open = Vec::new();
    let mut hull: Option<Interval> = None;
    let mut depth = 0;
    loop {
        let results = exec::map_indexed(frontier.len(), |i| evaluate_leaf(&f, predicate, &frontier[i]));
        let mut next = Vec::new();
        let mut here = 0;
        for (b, (enc, status)) in frontier.into_iter().zip(results) {
            match status {
                LeafStatus::Certified => {
                    here += 1;
                    hull = Some(hull.map_or(enc, |h| h.hull(&enc)));
                }
                LeafStatus::Undecided if depth < max_depth => {
                    let (l, r) = bisect_widest(&b);
                    next.push(l);
                    next.push(r);
                }
                status => open.push(Leaf { depth, bounds: b, enclosure: enc, status }),
            }
        }
        certified += here;
        certified_by_depth.push(here);
        if next.is_empty() {
            break;
        }
        frontier = next;
        depth += 1;
    }
    let verdict = if open.iter().any(|l| matches!(l.status, LeafStatus::Refuted { .. })) {
        Verdict::Refuted
    } else if open.is_empty() {
        Verdict::Certified
    } else {
        Verdict::Undecided
    };
    CertificateTrace {
        region: region.name().into(),
        predicate: predicate.id(),
        map: kind,
        max_depth,
        depth_reached: depth,
        certified,
        certified_by_depth,
        open,
        certified_hull: hull,
        verdict,
    }
}

/// Samples the predicate at random points of the region with random cone
/// vectors and returns the number of violations. A certified predicate must
/// return zero.
pub fn sampling_cross_check(
    ctx: &Arc<Construction>,
    kind: MapKind,
    predicate: Predicate,
    region: &CertRegion,
    samples: usize,
    seed: u64,
) -> usize {
    let p = &ctx.params;
    let (m, n) = (p.m, p.n);
    let boxes = region.boxes(ctx);
    let map = ctx.map(kind);
    exec::sweep(samples, seed, |range, rng| {
        let mut bad = 0;
        let mut v = vec![0.0; n];
        for _ in range {
            let b = &boxes[rng.gen_range(0..boxes.len())];
            let x: Vec<f64> = b.iter().map(|i| rng.gen_range(i.lo()..=i.hi())).collect();
            let violated = match predicate {
                Predicate::ConeRatio { kappa } => {
                    sample_cone_vector(rng, m, n, kappa, &mut v);
                    cone_ratio_raw(&mat_vec(&map.jacobian(&x), &v), m) >= kappa
                }
                Predicate::Expansion { factor } => {
                    let ratio = p.kappa * rng.gen_range(0.0..=1.0);
                    sample_cone_vector(rng, m, n, ratio, &mut v);
                    norm(&mat_vec(&map.jacobian(&x), &v)) <= factor * norm(&v)
                }
                Predicate::DetNonzero => map.jacobian(&x).determinant() == 0.0,
                Predicate::PhiBound => ctx.phi.eval(x[n - 1]).0.abs() > p.delta,
            };
            bad += usize::from(violated);
        }
        bad
    })
    .into_iter()
    .sum()
}
