//! Parameter system and its validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ifs;
use crate::profiles::PsiSpec;
use crate::torus::{arc_len, reduce_coord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    Strict,
    #[default]
    Empirical,
}

impl std::str::FromStr for ValidationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "strict" => Ok(Self::Strict),
            "empirical" => Ok(Self::Empirical),
            other => Err(format!("unknown mode `{other}` (expected strict or empirical)")),
        }
    }
}

/// Unvalidated parameters, as read from a config. Missing keys take the
/// default instance's values; `a0` and `p` fall back to `1/(8k)` and
/// `(-3/4, 0, …, 0, 1/4)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawParams {
    pub n: usize,
    pub k: usize,
    pub lambda: u32,
    pub r: f64,
    pub kappa: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    pub theta: f64,
    pub delta: f64,
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    pub m_target: f64,
    pub jac_slack: f64,
    pub stride: u32,
    pub seed: u64,
}

impl RawParams {
    /// The default three-dimensional instance (`n = 3`, `k = 2`, `λ = 41`).
    pub fn d3() -> Self {
        Self {
            n: 3,
            k: 2,
            lambda: 41,
            r: 0.024,
            kappa: 1.0,
            alpha: 1.5e-4,
            a0: None,
            theta: 0.04,
            delta: 5e-4,
            l: 0.1,
            p: None,
            m_target: 0.4,
            jac_slack: 0.05,
            stride: 3,
            seed: 1,
        }
    }
}

impl Default for RawParams {
    fn default() -> Self {
        Self::d3()
    }
}

/// Machine-readable violation codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    DimensionTooSmall,
    DimensionTooLarge,
    CentralTooSmall,
    CentralTooLarge,
    LambdaTooSmall,
    RadiusRange,
    KappaRange,
    AlphaRange,
    A0Range,
    ThetaRange,
    DeltaRange,
    LRange,
    StrideRange,
    MTargetRange,
    JacSlackRange,
    PointDimension,
    SlicesOverlap,
    BallMeetsSlices,
    LambdaVsRadius,
    LambdaVsDisplacement,
    LambdaVsUnstableDim,
    AlphaVsCone,
    PsiBudget,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DimensionTooSmall => "dimension-too-small",
            Self::DimensionTooLarge => "dimension-too-large",
            Self::CentralTooSmall => "central-too-small",
            Self::CentralTooLarge => "central-too-large",
            Self::LambdaTooSmall => "lambda-too-small",
            Self::RadiusRange => "radius-range",
            Self::KappaRange => "kappa-range",
            Self::AlphaRange => "alpha-range",
            Self::A0Range => "a0-range",
            Self::ThetaRange => "theta-range",
            Self::DeltaRange => "delta-range",
            Self::LRange => "l-range",
            Self::StrideRange => "stride-range",
            Self::MTargetRange => "m-target-range",
            Self::JacSlackRange => "jac-slack-range",
            Self::PointDimension => "point-dimension",
            Self::SlicesOverlap => "slices-overlap",
            Self::BallMeetsSlices => "ball-meets-slices",
            Self::LambdaVsRadius => "lambda-vs-radius",
            Self::LambdaVsDisplacement => "lambda-vs-displacement",
            Self::LambdaVsUnstableDim => "lambda-vs-unstable-dim",
            Self::AlphaVsCone => "alpha-vs-cone",
            Self::PsiBudget => "psi-budget",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// The inequality that failed, e.g. `r < 1/20`.
    pub inequality: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code.as_str(), self.inequality, self.detail)
    }
}

/// Validated parameters with every derived quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub lambda: u32,
    pub r: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub a0: f64,
    /// `3a0/2`, the parameter of the piecewise-linear map being smoothed.
    pub a: f64,
    pub theta: f64,
    pub delta: f64,
    pub l: f64,
    pub p: Vec<f64>,
    pub m_target: f64,
    /// Recorded `max ‖Id - member‖_∞` of the built minimal pair.
    pub m_recorded: f64,
    pub jac_slack: f64,
    pub stride: u32,
    pub seed: u64,
    pub m_psi: f64,
    /// Slice centers `c_i = 2·stride·i/(λ-1)`, `i = 0..k+2`.
    pub centers: Vec<f64>,
    pub mode: ValidationMode,
}

impl Params {
    pub fn lambda_f(&self) -> f64 {
        self.lambda as f64
    }

    /// `λ^m`, the determinant of `A`.
    pub fn lambda_pow_m(&self) -> f64 {
        self.lambda_f().powi(self.m as i32)
    }

    pub fn slice_count(&self) -> usize {
        self.k + 3
    }

    /// The saddle `(0_m, 1_k)` (with `1` stored as `-1`).
    pub fn saddle(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        x.extend(std::iter::repeat_n(reduce_coord(1.0), self.k));
        x
    }

    /// `q1 = p + (δ/4) e_n` and `q2 = p + (δ/8) e_n`.
    pub fn q1(&self) -> Vec<f64> {
        let mut q = self.p.clone();
        q[self.n - 1] += self.delta / 4.0;
        q
    }

    pub fn q2(&self) -> Vec<f64> {
        let mut q = self.p.clone();
        q[self.n - 1] += self.delta / 8.0;
        q
    }
}

/// Default critical-ball center `(-3/4, 0, …, 0, 1/4)`.
pub fn default_p(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[0] = -0.75;
    p[n - 1] = 0.25;
    p
}

/// Slice centers for the given stride.
pub fn slice_centers(k: usize, lambda: u32, stride: u32) -> Vec<f64> {
    let denom = (lambda - 1) as f64;
    (0..k + 3)
        .map(|i| reduce_coord(2.0 * (stride as f64) * i as f64 / denom))
        .collect()
}

/// Toral distance from a point of `T^m` to the cube `[c - h, c + h]^m`.
fn dist_to_cube(x: &[f64], c: f64, h: f64) -> f64 {
    x.iter()
        .map(|&xi| {
            let d = (arc_len(xi, c) - h).max(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

struct Collector(Vec<Violation>);

impl Collector {
    fn check(&mut self, ok: bool, code: ViolationCode, inequality: &str, detail: impl FnOnce() -> String) {
        if !ok {
            self.0.push(Violation { code, inequality: inequality.to_string(), detail: detail() });
        }
    }
}

/// Validates `raw`. Empirical mode enforces the structural and range
/// constraints; strict mode additionally enforces the sufficient analytic
/// inequalities on `λ`, `α` and `δ`.
pub fn params_validate(raw: &RawParams, mode: ValidationMode) -> std::result::Result<Params, Vec<Violation>> {
    use ViolationCode::*;
    let mut v = Collector(Vec::new());
    let RawParams { n, k, lambda, r, kappa, alpha, theta, delta, l, m_target, jac_slack, stride, seed, .. } =
        raw.clone();

    v.check(n >= 2, DimensionTooSmall, "n ≥ 2", || format!("n = {n}"));
    v.check(n <= super::maps::MAX_DIM, DimensionTooLarge, "n ≤ 16", || format!("n = {n}"));
    v.check(k >= 1, CentralTooSmall, "k ≥ 1", || format!("k = {k}"));
    v.check(k + 1 <= n, CentralTooLarge, "k ≤ n−1", || format!("k = {k}, n = {n}"));
    v.check(lambda >= 2, LambdaTooSmall, "λ ≥ 2", || format!("λ = {lambda}"));
    if n == 3 && k == 2 {
        v.check(r > 0.0 && r < 1.0 / 20.0, RadiusRange, "r < 1/20", || format!("r = {r}"));
    } else {
        v.check(r > 0.0 && r < 1.0 / (10.0 * k.max(1) as f64), RadiusRange, "r < 1/(10k)", || {
            format!("r = {r}, k = {k}")
        });
    }
    v.check(kappa > 0.0 && kappa < 3.0, KappaRange, "0 < κ < 3", || format!("κ = {kappa}"));
    v.check(alpha > 0.0 && alpha <= 1.0, AlphaRange, "0 < α ≤ 1", || format!("α = {alpha}"));
    v.check(l > 0.0 && l < 1.0, LRange, "0 < l < 1", || format!("l = {l}"));
    v.check(theta > 0.0 && theta < l / 2.0, ThetaRange, "0 < θ < l/2", || format!("θ = {theta}, l = {l}"));
    v.check(delta > 0.0 && delta < 2.0 * theta, DeltaRange, "0 < δ < 2θ", || {
        format!("δ = {delta}, θ = {theta}")
    });
    v.check(stride >= 1, StrideRange, "stride ≥ 1", || format!("stride = {stride}"));
    v.check(m_target > 0.0 && m_target < 1.0, MTargetRange, "0 < M < 1", || format!("M = {m_target}"));
    v.check(jac_slack > 0.0, JacSlackRange, "jac_slack > 0", || format!("jac_slack = {jac_slack}"));
    let a0 = raw.a0.unwrap_or(1.0 / (8.0 * k.max(1) as f64));
    v.check(a0 > 0.0 && a0 <= 1.0 / (8.0 * k.max(1) as f64), A0Range, "0 < a0 ≤ 1/(8k)", || {
        format!("a0 = {a0}")
    });
    let p = raw.p.clone().unwrap_or_else(|| default_p(n.max(2)));
    v.check(p.len() == n, PointDimension, "p ∈ T^n", || format!("p has {} coordinates", p.len()));
    if !v.0.is_empty() {
        return Err(v.0);
    }
    let p: Vec<f64> = p.into_iter().map(reduce_coord).collect();
    let m = n - k;

    let centers = slice_centers(k, lambda, stride);
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let gap = arc_len(centers[i], centers[j]);
            v.check(gap > 4.0 * r, SlicesOverlap, "K~_i ∩ K~_j = ∅", || {
                format!("slices {i} and {j} are {gap:.6} apart, need > 4r = {}", 4.0 * r)
            });
        }
    }
    for (i, &c) in centers.iter().enumerate() {
        let d = dist_to_cube(&p[..m], c, 2.0 * r);
        v.check(d > l, BallMeetsSlices, "B(p,l) ∩ (K~ × T^k) = ∅", || {
            format!("p is {d:.6} from slice {i}, need > l = {l}")
        });
    }

    let psi = PsiSpec::new(theta, l).expect("θ range checked above");
    let m_recorded = ifs::build_f1_with_slack(k, m_target, jac_slack, seed)
        .map(|f| f.max_displacement)
        .unwrap_or(m_target);

    if mode == ValidationMode::Strict {
        let lf = lambda as f64;
        v.check(lf > 1.0 / r, LambdaVsRadius, "λ > 1/r", || format!("λ = {lambda}, 1/r = {}", 1.0 / r));
        if n == 3 {
            let need = 80.0 * m_recorded / (r * kappa);
            v.check(lf >= need, LambdaVsDisplacement, "λ ≥ 80M/(rκ)", || format!("need λ ≥ {need}"));
        } else {
            let need = 2.0 * m_recorded / (r * kappa) + 2.0 + (n as f64).sqrt();
            v.check(lf >= need, LambdaVsDisplacement, "λ ≥ 2M/(rκ)+2+√n", || format!("need λ ≥ {need}"));
        }
        v.check(lambda as usize > m, LambdaVsUnstableDim, "λ > m", || format!("λ = {lambda}, m = {m}"));
        v.check(alpha <= kappa * r / 80.0, AlphaVsCone, "α ≤ κr/80", || {
            format!("α = {alpha}, κr/80 = {}", kappa * r / 80.0)
        });
        let budget = 2.0 * n as f64 * (1.0 + kappa) * delta * psi.m_psi;
        v.check(budget < kappa, PsiBudget, "2n(1+κ)δm_ψ < κ", || format!("lhs = {budget}, κ = {kappa}"));
    }

    if !v.0.is_empty() {
        return Err(v.0);
    }
    Ok(Params {
        n,
        k,
        m,
        lambda,
        r,
        kappa,
        alpha,
        a0,
        a: 1.5 * a0,
        theta,
        delta,
        l,
        p,
        m_target,
        m_recorded,
        jac_slack,
        stride,
        seed,
        m_psi: psi.m_psi,
        centers,
        mode,
    })
}
