use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use blender_core::endo::{params_validate, MapKind};
use blender_core::exec;
use blender_core::ifs::{inradius_threshold, preimage_inradius_growth, SearchStatus};
use blender_core::probes::{
    frozen_central_bound, grid_coverage, robustness_sweep, seeded_start, stable_manifold_probe, transitivity_probe,
    unstable_manifold_probe, HitReport, HitStatus, ProbeSpec, DEFAULT_CELL_BUDGET,
};
use blender_core::rigor::{sampling_cross_check, verify_inequality, CertRegion, Predicate, Verdict};
use blender_core::singular::{critical_set_sample, persistence_probe};
use blender_core::tangent::{check_cone_invariance, check_expansion, nh_inequalities_probe, Region};
use blender_core::{Construction, TorusBox};

use crate::config::Config;
use crate::report::{fmt_point, write_table, Record, Report, Status, EVIDENCE_NOTE};

/// Failure that ends a command before a report exists.
pub enum Abort {
    /// Invalid configuration or arguments (exit 2).
    Invalid(String),
    /// Output could not be written (exit 2).
    Io(String),
}

impl From<std::io::Error> for Abort {
    fn from(e: std::io::Error) -> Self {
        Abort::Io(e.to_string())
    }
}

impl From<blender_core::Error> for Abort {
    fn from(e: blender_core::Error) -> Self {
        Abort::Invalid(e.to_string())
    }
}

/// Extra data files written next to a report.
pub struct Table {
    pub file: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
    /// Free-form attachments, `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.report.write(dir)?;
        for t in &self.tables {
            write_table(&dir.join(t.file), t.header, &t.rows)?;
        }
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

pub fn build_context(cfg: &Config) -> Result<Arc<Construction>, Abort> {
    let params = params_validate(&cfg.params, cfg.mode).map_err(|v| {
        Abort::Invalid(v.iter().map(|v| format!("violation {v}")).collect::<Vec<_>>().join("\n"))
    })?;
    Ok(Arc::new(Construction::new(params)?))
}

pub fn build(cfg: &Config) -> Result<Outcome, Abort> {
    let mut report = Report::new("build", &cfg.hash());
    match params_validate(&cfg.params, cfg.mode) {
        Err(violations) => {
            for v in violations {
                report.records.push(
                    Record::new(v.code.as_str(), &v.inequality, Status::Fail).metric("detail", &v.detail),
                );
            }
            Ok(Outcome { report, tables: Vec::new(), files: Vec::new() })
        }
        Ok(params) => {
            let ctx = Construction::new(params)?;
            let p = &ctx.params;
            report.records.push(
                Record::new("params", "all admissibility inequalities hold", Status::Pass)
                    .metric("mode", format!("{:?}", p.mode).to_lowercase())
                    .metric("n", p.n)
                    .metric("k", p.k)
                    .metric("lambda", p.lambda)
                    .metric("m_recorded", p.m_recorded)
                    .metric("m_psi", p.m_psi)
                    .metric("centers", fmt_point(&p.centers)),
            );
            report.records.push(
                Record::new("families", "F1 translations and F2 contracting pair built", Status::Pass)
                    .metric("f1_members", ctx.f1.len())
                    .metric("f1_max_displacement", ctx.f1.max_displacement)
                    .metric("f2_members", ctx.f2.len())
                    .metric("f2_max_displacement", ctx.f2.max_displacement),
            );
            let bundle = serde_json::to_string_pretty(&ctx).expect("construction serializes");
            Ok(Outcome { report, tables: Vec::new(), files: vec![("bundle.json".into(), bundle + "\n")] })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    Cones,
    Expansion,
    Critical,
    Persistence,
    Inradius,
    Nh,
    Rigor,
}

pub const ALL_CHECKS: [Check; 7] =
    [Check::Cones, Check::Expansion, Check::Critical, Check::Persistence, Check::Inradius, Check::Nh, Check::Rigor];

fn parse_region(name: &str) -> Result<CertRegion, Abort> {
    match name {
        "torus" => Ok(CertRegion::Torus),
        "ball" => Ok(CertRegion::Ball),
        "complement" => Ok(CertRegion::Complement),
        "transition" => Ok(CertRegion::Transition),
        other => Err(Abort::Invalid(format!("unknown region `{other}` (torus, ball, complement, transition)"))),
    }
}

pub fn verify(cfg: &Config, checks: &[Check]) -> Result<Outcome, Abort> {
    let region = parse_region(&cfg.budgets.rigor_region)?;
    let ctx = build_context(cfg)?;
    let p = &ctx.params;
    let b = &cfg.budgets;
    let f = ctx.map(MapKind::Singular);
    let mut report = Report::new("verify", &cfg.hash());
    report.notes.push(EVIDENCE_NOTE.into());
    let mut tables = Vec::new();
    let mut files = Vec::new();
    for (ci, &check) in checks.iter().enumerate() {
        let seed = exec::sub_seed(cfg.seed, ci as u64);
        match check {
            Check::Cones => {
                // a tenth each in the transition zones and the critical ball
                let focused = b.samples / 10;
                let parts = [(Region::Torus, b.samples - 2 * focused), (Region::Transition, focused), (Region::Ball, focused)];
                let mut worst = 0.0f64;
                let mut rec_metrics = Vec::new();
                for (i, (region, count)) in parts.into_iter().enumerate() {
                    let r = check_cone_invariance(&f, &ctx, region, p.kappa, count, exec::sub_seed(seed, i as u64))?;
                    worst = worst.max(r.max_ratio);
                    rec_metrics.push((format!("max_ratio_{}", region.as_str()), r.max_ratio.to_string()));
                }
                let mut rec = Record::new("cones", "‖(DF v)_c‖ < κ‖(DF v)_u‖ for v on the boundary of the unstable cone", Status::from_pass(worst < p.kappa))
                    .metric("samples", b.samples)
                    .metric("kappa", p.kappa)
                    .metric("max_ratio", worst);
                rec.metrics.extend(rec_metrics);
                report.records.push(rec);
            }
            Check::Expansion => {
                let mut min = f64::INFINITY;
                let mut floor = 0.0;
                let regions = [Region::Torus, Region::Transition, Region::Ball, Region::Surgery];
                for (i, region) in regions.into_iter().enumerate() {
                    let r = check_expansion(&f, &ctx, region, b.samples / regions.len(), exec::sub_seed(seed, i as u64), b.expansion_threshold);
                    min = min.min(r.min_factor);
                    floor = r.analytic_floor;
                }
                let pass = min > b.expansion_threshold && min >= floor - 1e-9;
                report.records.push(
                    Record::new("expansion", "‖DF v‖ ≥ λ/√(1+κ²)‖v‖ > threshold·‖v‖ on the unstable cone", Status::from_pass(pass))
                        .metric("samples", b.samples)
                        .metric("threshold", b.expansion_threshold)
                        .metric("analytic_floor", floor)
                        .metric("min_factor", min),
                );
            }
            Check::Critical => {
                let c = critical_set_sample(&ctx, b.critical_resolution)?;
                let lm = p.lambda_pow_m();
                let rel = |a: f64, e: f64| (a - e).abs() / e.abs();
                let pass = c.det_p.abs() <= 1e-10 * lm && rel(c.det_q1, 2.5 * lm) <= 1e-9 && rel(c.det_q2, -lm) <= 1e-9;
                report.records.push(
                    Record::new("critical", "det DF(p) = 0, det DF(q1) = 5λ^m/2, det DF(q2) = −λ^m", Status::from_pass(pass))
                        .metric("det_p", c.det_p)
                        .metric("det_q1", c.det_q1)
                        .metric("det_q2", c.det_q2)
                        .metric("critical_points", c.points.len())
                        .metric("max_defect", c.max_defect)
                        .metric("segment_roots", c.bracket.len()),
                );
                tables.push(Table {
                    file: "critical_points.csv",
                    header: &["point"],
                    rows: c.points.iter().map(|x| vec![fmt_point(x)]).collect(),
                });
            }
            Check::Persistence => {
                let v = persistence_probe(&ctx, b.persistence_eps, b.persistence_trials, seed)?;
                let found = v.trials.iter().filter(|t| t.found).count();
                report.records.push(
                    Record::new("persistence", "C¹-small perturbations keep a determinant sign change between q2 and q1", Status::from_pass(v.pass))
                        .metric("eps", v.eps)
                        .metric("trials", v.trials.len())
                        .metric("sign_changes", found),
                );
                tables.push(Table {
                    file: "persistence.csv",
                    header: &["seed", "det_q2_fd", "det_q1_fd", "det_q2_analytic", "det_q1_analytic", "root", "found"],
                    rows: v
                        .trials
                        .iter()
                        .map(|t| {
                            vec![
                                t.seed.to_string(),
                                t.det_q2_fd.to_string(),
                                t.det_q1_fd.to_string(),
                                t.det_q2_analytic.to_string(),
                                t.det_q1_analytic.to_string(),
                                t.root.map(|r| r.to_string()).unwrap_or_default(),
                                t.found.to_string(),
                            ]
                        })
                        .collect(),
                });
            }
            Check::Inradius => {
                // off the fixed points the greedy search can stall below the
                // threshold, so the default start matches the reference run
                let c = b.inradius_center.clone().unwrap_or_else(|| vec![if p.k == 1 { 0.0 } else { 0.3 }; p.k]);
                if c.len() != p.k {
                    return Err(Abort::Invalid(format!("inradius_center needs {} coordinates", p.k)));
                }
                let w = TorusBox::cube(&c, b.inradius_half_width)?;
                let t = preimage_inradius_growth(&ctx.f2, &w, b.inradius_steps)?;
                let pass = t.status == SearchStatus::Reached && t.is_monotone();
                report.records.push(
                    Record::new("inradius", "greedy F2 preimages of a small cube grow past the covering inradius", Status::from_pass(pass))
                        .metric("start", fmt_point(&c))
                        .metric("threshold", inradius_threshold(p.k))
                        .metric("final_inradius", t.final_inradius())
                        .metric("steps", t.steps.len())
                        .metric("monotone", t.is_monotone()),
                );
            }
            Check::Nh => {
                for slice in 0..p.centers.len() {
                    let r = nh_inequalities_probe(&ctx, slice, b.nh_samples, exec::sub_seed(seed, slice as u64))?;
                    report.records.push(
                        Record::new(&format!("nh-{slice}"), "{c_i} × T^k is invariant and normally hyperbolic for f", Status::from_pass(r.pass))
                            .metric("samples", r.samples)
                            .metric("inverse_unstable_norm", r.inverse_unstable_norm)
                            .metric("max_domination", r.max_domination)
                            .metric("invariance_error", r.invariance_error),
                    );
                }
            }
            Check::Rigor => {
                let cone = Predicate::ConeRatio { kappa: p.kappa };
                let expansion = Predicate::Expansion { factor: b.expansion_threshold };
                let runs = [(cone, region.clone(), b.rigor_depth), (expansion, CertRegion::Complement, 0)];
                for (pred, reg, depth) in runs {
                    let t = verify_inequality(&ctx, MapKind::Singular, pred, &reg, depth);
                    let violations = if t.verdict == Verdict::Certified {
                        sampling_cross_check(&ctx, MapKind::Singular, pred, &reg, b.samples.min(200_000), seed)
                    } else {
                        0
                    };
                    // undecided leaves are reported, not failed; a refutation or
                    // a sampled counterexample to a certificate is a failure
                    let pass = t.verdict != Verdict::Refuted && violations == 0;
                    let short = match pred {
                        Predicate::ConeRatio { .. } => "cone",
                        Predicate::Expansion { .. } => "expansion",
                        Predicate::DetNonzero => "det",
                        Predicate::PhiBound => "phi",
                    };
                    let name = format!("rigor-{short}-{}", reg.name());
                    report.records.push(
                        Record::new(&name, "interval enclosure of the predicate over every leaf of a bisection", Status::from_pass(pass))
                            .metric("predicate", pred.id())
                            .metric("certificate", t.verdict.as_str())
                            .metric("max_depth", t.max_depth)
                            .metric("depth_reached", t.depth_reached)
                            .metric("leaves_certified", t.certified)
                            .metric("leaves_undecided", t.undecided())
                            .metric("leaves_refuted", t.refuted())
                            .metric("sampled_violations", violations),
                    );
                    files.push((format!("{name}.txt"), t.to_text()));
                }
            }
        }
    }
    Ok(Outcome { report, tables, files })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ProbeSelection {
    pub coverage: bool,
    pub negative_control_a: bool,
    pub transitivity: bool,
    pub unstable_manifold: bool,
    pub stable_manifold: bool,
    pub robustness: bool,
}

impl ProbeSelection {
    pub fn is_empty(&self) -> bool {
        !(self.coverage
            || self.negative_control_a
            || self.transitivity
            || self.unstable_manifold
            || self.stable_manifold
            || self.robustness)
    }

    pub fn all() -> Self {
        Self {
            coverage: true,
            negative_control_a: true,
            transitivity: true,
            unstable_manifold: true,
            stable_manifold: true,
            robustness: true,
        }
    }
}

const HIT_HEADER: &[&str] = &["probe", "trial", "status", "iterate", "witness", "witness_image", "replay"];

fn hit_row(probe: &str, trial: usize, r: &HitReport, replay: bool) -> Vec<String> {
    vec![
        probe.into(),
        trial.to_string(),
        match r.status {
            HitStatus::Hit => "hit".into(),
            HitStatus::Exhausted => "exhausted".into(),
        },
        r.iterate.map(|i| i.to_string()).unwrap_or_default(),
        r.witness.as_deref().map(fmt_point).unwrap_or_default(),
        r.witness_image.as_deref().map(fmt_point).unwrap_or_default(),
        replay.to_string(),
    ]
}

fn random_cube(rng: &mut impl Rng, n: usize, half: f64) -> Result<TorusBox, Abort> {
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(TorusBox::cube(&c, half)?)
}

pub fn probe(cfg: &Config, sel: ProbeSelection) -> Result<Outcome, Abort> {
    let ctx = build_context(cfg)?;
    let p = &ctx.params;
    let n = p.n;
    let b = &cfg.budgets;
    let f = ctx.map(MapKind::Singular);
    let mut report = Report::new("probe", &cfg.hash());
    report.notes.push(EVIDENCE_NOTE.into());
    let mut coverage_rows = Vec::new();
    let mut hit_rows = Vec::new();
    let needed = (b.hit_rate * b.trials as f64).ceil() as usize;

    if sel.coverage {
        let mut good = 0;
        let mut min = 1.0f64;
        for s in 0..b.coverage_seeds {
            let seed = exec::sub_seed(cfg.seed, s as u64);
            let r = grid_coverage(&f, &seeded_start(n, seed), b.coverage_steps, b.coverage_resolution, DEFAULT_CELL_BUDGET)?;
            good += usize::from(r.fraction >= b.coverage_threshold);
            min = min.min(r.fraction);
            for (step, frac) in &r.history {
                coverage_rows.push(vec!["F".into(), seed.to_string(), step.to_string(), frac.to_string()]);
            }
        }
        // one seed in ten may fall short
        let pass = good * 10 >= 9 * b.coverage_seeds;
        report.records.push(
            Record::new("coverage", "a single orbit of F visits every cell of the res^n grid", Status::from_pass(pass))
                .metric("steps", b.coverage_steps)
                .metric("resolution", b.coverage_resolution)
                .metric("threshold", b.coverage_threshold)
                .metric("seeds", b.coverage_seeds)
                .metric("seeds_above_threshold", good)
                .metric("min_fraction", min),
        );
    }
    if sel.negative_control_a {
        let a = ctx.map(MapKind::Linear);
        let bound = frozen_central_bound(b.coverage_resolution, p.m, n);
        let mut max = 0.0f64;
        for s in 0..b.coverage_seeds {
            let seed = exec::sub_seed(cfg.seed, s as u64);
            let r = grid_coverage(&a, &seeded_start(n, seed), b.control_steps, b.coverage_resolution, DEFAULT_CELL_BUDGET)?;
            max = max.max(r.fraction);
            for (step, frac) in &r.history {
                coverage_rows.push(vec!["A".into(), seed.to_string(), step.to_string(), frac.to_string()]);
            }
        }
        let status = if max <= bound { Status::ExpectedFail } else { Status::Fail };
        report.records.push(
            Record::new("negative-control-A", "A keeps central coordinates fixed, so coverage stays below the frozen bound", status)
                .metric("steps", b.control_steps)
                .metric("frozen_bound", bound)
                .metric("max_fraction", max),
        );
    }
    if sel.transitivity {
        let mut rng = exec::rng_for(cfg.seed, 0x7A);
        let (mut hits, mut replay) = (0, true);
        for t in 0..b.trials {
            let u = random_cube(&mut rng, n, b.box_half_width)?;
            let v = random_cube(&mut rng, n, b.box_half_width)?;
            let r = transitivity_probe(&f, &u, &v, b.max_iterates, b.transitivity_samples, exec::sub_seed(cfg.seed, t as u64));
            let ok = r.replay(&f);
            hits += usize::from(r.status == HitStatus::Hit);
            replay &= ok;
            hit_rows.push(hit_row("transitivity", t, &r, ok));
        }
        report.records.push(
            Record::new("transitivity", "F^n(U) ∩ V ≠ ∅ for some n ≥ 1", Status::from_pass(hits >= needed && replay))
                .metric("trials", b.trials)
                .metric("hits", hits)
                .metric("witnesses_replay", replay),
        );
    }
    for (on, name, anchor) in [
        (sel.unstable_manifold, "unstable-manifold", "the unstable manifold of the saddle meets every open box"),
        (sel.stable_manifold, "stable-manifold", "forward iterates of every open box reach the saddle's neighbourhood"),
    ] {
        if !on {
            continue;
        }
        let mut rng = exec::rng_for(cfg.seed, if name.starts_with('u') { 0xA1 } else { 0xA2 });
        let (mut hits, mut replay) = (0, true);
        for t in 0..b.trials {
            let v = random_cube(&mut rng, n, b.box_half_width)?;
            let seed = exec::sub_seed(cfg.seed, t as u64);
            let r = if name.starts_with('u') {
                unstable_manifold_probe(&ctx, &f, &v, b.unstable_budget, b.unstable_cloud, seed)
            } else {
                stable_manifold_probe(&ctx, &f, &v, b.stable_budget, b.stable_cloud, seed)
            };
            let ok = r.replay(&f);
            hits += usize::from(r.status == HitStatus::Hit);
            replay &= ok;
            hit_rows.push(hit_row(name, t, &r, ok));
        }
        report.records.push(
            Record::new(name, anchor, Status::from_pass(hits >= needed && replay))
                .metric("trials", b.trials)
                .metric("hits", hits)
                .metric("witnesses_replay", replay),
        );
    }
    let mut robustness_rows = Vec::new();
    if sel.robustness {
        let spec = ProbeSpec::Coverage {
            steps: b.robustness_steps,
            resolution: b.robustness_resolution,
            threshold: b.robustness_threshold,
        };
        let r = robustness_sweep(&f, b.robustness_eps, b.robustness_trials, &spec, cfg.seed)?;
        let min = r.trials.iter().map(|t| t.metric).fold(1.0f64, f64::min);
        report.records.push(
            Record::new("robustness", "C¹-small perturbations of F keep orbits dense at the grid scale", Status::from_pass(r.pass_rate == 1.0))
                .metric("eps", r.eps)
                .metric("trials", r.trials.len())
                .metric("pass_rate", r.pass_rate)
                .metric("min_coverage", min),
        );
        for t in &r.trials {
            robustness_rows.push(vec![t.seed.to_string(), t.metric.to_string(), t.pass.to_string()]);
        }
    }

    let mut tables = Vec::new();
    if sel.coverage || sel.negative_control_a {
        tables.push(Table { file: "coverage.csv", header: &["map", "seed", "step", "fraction"], rows: coverage_rows });
    }
    if sel.transitivity || sel.unstable_manifold || sel.stable_manifold {
        tables.push(Table { file: "hits.csv", header: HIT_HEADER, rows: hit_rows });
    }
    if sel.robustness {
        tables.push(Table { file: "robustness.csv", header: &["seed", "coverage", "pass"], rows: robustness_rows });
    }
    Ok(Outcome { report, tables, files: Vec::new() })
}

/// Collects the summary CSVs in `dir` into one report.
pub fn report(cfg: &Config, dir: &Path) -> Result<Outcome, Abort> {
    let mut out = Report::new("report", &cfg.hash());
    let mut found = false;
    for cmd in ["build", "verify", "probe"] {
        let path = dir.join(format!("{cmd}.csv"));
        if !path.exists() {
            continue;
        }
        found = true;
        let r = Report::read_csv(&path, &cfg.hash()).map_err(|e| Abort::Invalid(format!("{}: {e}", path.display())))?;
        for mut rec in r.records {
            rec.name = format!("{cmd}/{}", rec.name);
            out.records.push(rec);
        }
    }
    if !found {
        return Err(Abort::Invalid(format!("no reports found in {}", dir.display())));
    }
    out.notes.push(EVIDENCE_NOTE.into());
    Ok(Outcome { report: out, tables: Vec::new(), files: Vec::new() })
}
