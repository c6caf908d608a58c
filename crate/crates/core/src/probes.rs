//! Finite-budget dynamics experiments: orbit coverage, hitting times and
//! forward iteration of local unstable and stable discs.
//!
//! These are evidence, not proofs: every report carries its budget and
//! tolerance, and density is only ever claimed up to them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::endo::{perturb, Construction, PerturbationField, TorusMap};
use crate::error::{Error, Result};
use crate::exec;
use crate::torus::{arc_diff, reduce_coord, Box as TorusBox};

/// Streaming forward orbit `x_1, x_2, …, x_N` (the start point is not yielded).
pub struct Orbit<'a, M: ?Sized> {
    map: &'a M,
    current: Vec<f64>,
    next: Vec<f64>,
    remaining: usize,
}

impl<M: TorusMap + ?Sized> Iterator for Orbit<'_, M> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.map.eval_into(&self.current, &mut self.next);
        std::mem::swap(&mut self.current, &mut self.next);
        Some(self.current.clone())
    }
}

pub fn orbit<'a, M: TorusMap + ?Sized>(map: &'a M, x0: &[f64], steps: usize) -> Orbit<'a, M> {
    let current: Vec<f64> = x0.iter().map(|&c| reduce_coord(c)).collect();
    let next = vec![0.0; current.len()];
    Orbit { map, current, next, remaining: steps }
}

/// Default cap on `resolution^n` for coverage bitsets (2^32 cells, 512 MiB).
pub const DEFAULT_CELL_BUDGET: u128 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub resolution: usize,
    pub visited: u64,
    pub total: u64,
    pub fraction: f64,
    pub orbit_length: usize,
    /// First step at which every cell had been visited.
    pub first_full: Option<usize>,
    /// `(step, fraction)` at powers of two and at the end.
    pub history: Vec<(usize, f64)>,
}

#[inline]
fn cell_of(x: &[f64], res: usize) -> usize {
    let mut idx = 0usize;
    for &c in x {
        let i = (((c + 1.0) * 0.5 * res as f64) as usize).min(res - 1);
        idx = idx * res + i;
    }
    idx
}

/// Counts the cells of a uniform `resolution^n` grid visited by the orbit of
/// `x0` (start point included).
pub fn grid_coverage<M: TorusMap + ?Sized>(
    map: &M,
    x0: &[f64],
    steps: usize,
    resolution: usize,
    cell_budget: u128,
) -> Result<CoverageReport> {
    let n = map.dim();
    if resolution == 0 {
        return Err(Error::OutOfRange("resolution must be positive".into()));
    }
    let cells = (resolution as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if cells > cell_budget {
        return Err(Error::MemoryGuard { cells, budget: cell_budget });
    }
    let total = cells as usize;
    let mut bits = vec![0u64; total.div_ceil(64)];
    let mut visited = 0u64;
    let mut mark = |x: &[f64], visited: &mut u64| {
        let c = cell_of(x, resolution);
        let (w, b) = (c / 64, 1u64 << (c % 64));
        if bits[w] & b == 0 {
            bits[w] |= b;
            *visited += 1;
        }
    };
    let mut x: Vec<f64> = x0.iter().map(|&c| reduce_coord(c)).collect();
    let mut y = vec![0.0; n];
    mark(&x, &mut visited);
    let mut first_full = (visited as usize == total).then_some(0);
    let mut history = Vec::new();
    let mut next_mark = 1usize;
    for step in 1..=steps {
        map.eval_into(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
        mark(&x, &mut visited);
        if first_full.is_none() && visited as usize == total {
            first_full = Some(step);
        }
        if step == next_mark {
            history.push((step, visited as f64 / total as f64));
            next_mark *= 2;
        }
    }
    if history.last().map(|h| h.0) != Some(steps) {
        history.push((steps, visited as f64 / total as f64));
    }
    Ok(CoverageReport {
        resolution,
        visited,
        total: total as u64,
        fraction: visited as f64 / total as f64,
        orbit_length: steps,
        first_full,
        history,
    })
}

/// Uniform random start point derived from `seed`.
pub fn seeded_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = exec::rng_for(seed, 0x57A7);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Coverage bound for a map whose central coordinates are frozen.
pub fn frozen_central_bound(resolution: usize, m: usize, n: usize) -> f64 {
    (resolution as f64).powi(m as i32) / (resolution as f64).powi(n as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitStatus {
    Hit,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub source: TorusBox,
    pub target: TorusBox,
    pub status: HitStatus,
    /// First iterate with a sample in the target.
    pub iterate: Option<usize>,
    pub witness: Option<Vec<f64>>,
    pub witness_image: Option<Vec<f64>>,
    pub samples: usize,
    pub max_iterates: usize,
}

impl HitReport {
    /// Re-iterates the witness and checks that it lands in the target.
    pub fn replay<M: TorusMap + ?Sized>(&self, map: &M) -> bool {
        match (self.status, &self.witness, self.iterate) {
            (HitStatus::Hit, Some(w), Some(k)) => {
                let end = orbit(map, w, k).last().unwrap_or_else(|| w.clone());
                let close = self
                    .witness_image
                    .as_ref()
                    .is_some_and(|img| crate::torus::dist_raw(img, &end) < 1e-9);
                close && self.target.contains(&end)
            }
            _ => true,
        }
    }
}

/// Iterates every cloud point in lockstep for up to `max_iterates` steps and
/// returns the first `(iterate, cloud index, point)` landing in `target`.
/// Iterate 0 is the cloud itself and is checked only if `from_zero`.
fn first_hit<M: TorusMap + ?Sized>(
    map: &M,
    cloud: &[Vec<f64>],
    target: &TorusBox,
    max_iterates: usize,
    from_zero: bool,
) -> Option<(usize, usize, Vec<f64>)> {
    let ranges = exec::split(cloud.len(), exec::SWEEP_CHUNKS);
    let per_chunk = exec::map_indexed(ranges.len(), |c| {
        let range = ranges[c].clone();
        let mut pts: Vec<Vec<f64>> = cloud[range.clone()].to_vec();
        let mut buf = vec![0.0; map.dim()];
        for step in 0..=max_iterates {
            if step > 0 {
                for p in pts.iter_mut() {
                    map.eval_into(p, &mut buf);
                    p.copy_from_slice(&buf);
                }
            }
            if step == 0 && !from_zero {
                continue;
            }
            if let Some(i) = pts.iter().position(|p| target.contains(p)) {
                return Some((step, range.start + i, pts[i].clone()));
            }
        }
        None
    });
    per_chunk
        .into_iter()
        .flatten()
        .min_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)))
}

fn hit_report(
    source: &TorusBox,
    target: &TorusBox,
    cloud: &[Vec<f64>],
    hit: Option<(usize, usize, Vec<f64>)>,
    max_iterates: usize,
) -> HitReport {
    let (status, iterate, witness, image) = match hit {
        Some((k, i, img)) => (HitStatus::Hit, Some(k), Some(cloud[i].clone()), Some(img)),
        None => (HitStatus::Exhausted, None, None, None),
    };
    HitReport {
        source: source.clone(),
        target: target.clone(),
        status,
        iterate,
        witness,
        witness_image: image,
        samples: cloud.len(),
        max_iterates,
    }
}

fn uniform_cloud(b: &TorusBox, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = exec::rng_for(seed, 0xC10D);
    (0..samples)
        .map(|_| {
            let t: Vec<f64> = (0..b.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            b.point_at(&t)
        })
        .collect()
}

/// Looks for `n ≥ 1` with `map^n(U) ∩ V ≠ ∅` using a random cloud in `U`.
pub fn transitivity_probe<M: TorusMap + ?Sized>(
    map: &M,
    u: &TorusBox,
    v: &TorusBox,
    max_iterates: usize,
    samples: usize,
    seed: u64,
) -> HitReport {
    let cloud = uniform_cloud(u, samples, seed);
    let hit = first_hit(map, &cloud, v, max_iterates, false);
    hit_report(u, v, &cloud, hit, max_iterates)
}

/// Cloud size and iterate count for a `budget` of point-iterates.
fn split_budget(budget: usize, cloud: usize) -> (usize, usize) {
    let cloud = cloud.clamp(1, budget.max(1));
    (cloud, (budget / cloud).max(1))
}

/// Default cloud size for the unstable-manifold probe.
pub const UNSTABLE_CLOUD: usize = 2000;
/// Default cloud size for the stable-manifold probe.
pub const STABLE_CLOUD: usize = 20_000;

/// The local unstable disc `(-r, r)^m × {1_k}` of the saddle.
pub fn unstable_disc(ctx: &Construction) -> TorusBox {
    let p = &ctx.params;
    let mut half = vec![p.r; p.m];
    half.extend(std::iter::repeat_n(f64::MIN_POSITIVE, p.k));
    TorusBox { center: p.saddle(), half_widths: half }
}

/// Forward iterates of a fine cloud on the local unstable disc of
/// `(0_m, 1_k)`; reports the first entry into `target`.
pub fn unstable_manifold_probe<M: TorusMap + ?Sized>(
    ctx: &Construction,
    map: &M,
    target: &TorusBox,
    budget: usize,
    cloud_size: usize,
    seed: u64,
) -> HitReport {
    let p = &ctx.params;
    let (size, iterates) = split_budget(budget, cloud_size);
    let mut rng = exec::rng_for(seed, 0x0B5);
    let saddle = p.saddle();
    let cloud: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            let mut x = saddle.clone();
            if p.m == 1 {
                // evenly spaced on the open segment
                x[0] = -p.r + 2.0 * p.r * (i as f64 + 0.5) / size as f64;
            } else {
                for v in &mut x[..p.m] {
                    *v = rng.gen_range(-p.r..p.r);
                }
            }
            x
        })
        .collect();
    let hit = first_hit(map, &cloud, target, iterates, true);
    hit_report(&unstable_disc(ctx), target, &cloud, hit, iterates)
}

/// The box `{0_m ± r/2} × (1_k ± r/2)` around the saddle.
pub fn saddle_box(ctx: &Construction) -> TorusBox {
    let p = &ctx.params;
    TorusBox { center: p.saddle(), half_widths: vec![p.r / 2.0; p.n] }
}

/// Forward iterates of a horizontal `m`-disc through the center of `source`
/// (central block fixed at the center's); reports the first entry into the
/// box around the saddle.
pub fn stable_manifold_probe<M: TorusMap + ?Sized>(
    ctx: &Construction,
    map: &M,
    source: &TorusBox,
    budget: usize,
    cloud_size: usize,
    seed: u64,
) -> HitReport {
    let p = &ctx.params;
    let (size, iterates) = split_budget(budget, cloud_size);
    let mut rng = exec::rng_for(seed, 0x5AB);
    let cloud: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            let mut x = source.center.clone();
            for j in 0..p.m {
                let t = if p.m == 1 { -1.0 + 2.0 * (i as f64 + 0.5) / size as f64 } else { rng.gen_range(-1.0..1.0) };
                x[j] = reduce_coord(source.center[j] + t * source.half_widths[j]);
            }
            x
        })
        .collect();
    let target = saddle_box(ctx);
    let hit = first_hit(map, &cloud, &target, iterates, true);
    hit_report(source, &target, &cloud, hit, iterates)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterGrowth {
    pub initial: f64,
    /// Lifted diameters after each iterate.
    pub diameters: Vec<f64>,
    /// Ratio of consecutive diameters.
    pub factors: Vec<f64>,
    /// `⌈log_6(2 / initial)⌉`, the iterates needed to span at rate 6.
    pub iterates_to_span: usize,
}

/// Diameter growth of a horizontal segment through `center` along the first
/// unstable axis, of half-length `half`. Images are lifted to `R^n` by
/// accumulating shortest-arc steps between consecutive polyline vertices, so
/// the diameter keeps growing past the size of the torus.
pub fn diameter_growth<M: TorusMap + ?Sized>(
    map: &M,
    center: &[f64],
    half: f64,
    iterates: usize,
    vertices: usize,
) -> DiameterGrowth {
    let n = map.dim();
    let mut pts: Vec<Vec<f64>> = (0..vertices)
        .map(|i| {
            let mut x = center.to_vec();
            x[0] = reduce_coord(center[0] - half + 2.0 * half * i as f64 / (vertices - 1) as f64);
            x
        })
        .collect();
    let lifted_diameter = |pts: &[Vec<f64>]| {
        let mut acc = vec![0.0; n];
        let mut lifted = vec![acc.clone()];
        for w in pts.windows(2) {
            for j in 0..n {
                acc[j] += arc_diff(w[0][j], w[1][j]);
            }
            lifted.push(acc.clone());
        }
        let first = &lifted[0];
        // for a curve that is nearly a segment, the diameter is attained at an endpoint pair;
        // take the max over both endpoints to stay robust to mild bending
        let last = &lifted[lifted.len() - 1];
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        lifted.iter().map(|q| dist(q, first).max(dist(q, last))).fold(0.0, f64::max)
    };
    let initial = lifted_diameter(&pts);
    let mut diameters = Vec::with_capacity(iterates);
    let mut buf = vec![0.0; n];
    for _ in 0..iterates {
        for p in pts.iter_mut() {
            map.eval_into(p, &mut buf);
            p.copy_from_slice(&buf);
        }
        diameters.push(lifted_diameter(&pts));
    }
    let mut prev = initial;
    let factors = diameters
        .iter()
        .map(|&d| {
            let f = d / prev;
            prev = d;
            f
        })
        .collect();
    DiameterGrowth {
        initial,
        diameters,
        factors,
        iterates_to_span: ((2.0 / initial).ln() / 6f64.ln()).ceil().max(0.0) as usize,
    }
}

/// Which probe a robustness sweep runs on each perturbed map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProbeSpec {
    Coverage { steps: usize, resolution: usize, threshold: f64 },
    Transitivity { half_width: f64, max_iterates: usize, samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTrial {
    pub seed: u64,
    /// Coverage fraction, or 1/0 for hit/miss.
    pub metric: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub eps: f64,
    pub probe: ProbeSpec,
    pub trials: Vec<RobustnessTrial>,
    pub pass_rate: f64,
}

/// Runs `probe` on `trials` random `ε`-perturbations of `base`.
pub fn robustness_sweep<M: TorusMap + Clone>(
    base: &M,
    eps: f64,
    trials: usize,
    probe: &ProbeSpec,
    seed: u64,
) -> Result<RobustnessReport> {
    if !(eps >= 0.0) {
        return Err(Error::OutOfRange(format!("ε_pert = {eps} must be non-negative")));
    }
    let n = base.dim();
    let results = exec::map_indexed(trials, |t| -> Result<RobustnessTrial> {
        let trial_seed = exec::sub_seed(seed, t as u64);
        let field = if eps == 0.0 { PerturbationField::zero(n) } else { PerturbationField::random(n, eps, 2, trial_seed) };
        let g = perturb(base.clone(), field);
        let (metric, pass) = match probe {
            ProbeSpec::Coverage { steps, resolution, threshold } => {
                let x0 = seeded_start(n, trial_seed);
                let rep = exec::with_mode(exec::Mode::Sequential, || {
                    grid_coverage(&g, &x0, *steps, *resolution, DEFAULT_CELL_BUDGET)
                })?;
                (rep.fraction, rep.fraction >= *threshold)
            }
            ProbeSpec::Transitivity { half_width, max_iterates, samples } => {
                let mut rng = exec::rng_for(trial_seed, 1);
                let c1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let c2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let u = TorusBox::cube(&c1, *half_width)?;
                let v = TorusBox::cube(&c2, *half_width)?;
                let rep = exec::with_mode(exec::Mode::Sequential, || {
                    transitivity_probe(&g, &u, &v, *max_iterates, *samples, trial_seed)
                });
                let hit = rep.status == HitStatus::Hit;
                (if hit { 1.0 } else { 0.0 }, hit)
            }
        };
        Ok(RobustnessTrial { seed: trial_seed, metric, pass })
    });
    let trials_out: Vec<RobustnessTrial> = results.into_iter().collect::<Result<_>>()?;
    let pass_rate = trials_out.iter().filter(|t| t.pass).count() as f64 / trials_out.len().max(1) as f64;
    Ok(RobustnessReport { eps, probe: probe.clone(), trials: trials_out, pass_rate })
}
