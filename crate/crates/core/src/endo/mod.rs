//! The endomorphisms `A`, `f̂`, `f` and `F` and their perturbations.

mod maps;
mod params;
mod perturb;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{self, MapFamily, Member};
use crate::profiles::{BallCutoff, PhiSpec, PsiSpec, SliceLayout, Zone};
use crate::torus::reduce_coord;

pub use maps::{apply_a, EndoMap, MapKind, SurgeryTerms};
pub use params::{
    default_p, params_validate, slice_centers, Params, RawParams, ValidationMode, Violation, ViolationCode,
};
pub use perturb::{perturb, PerturbationField, Perturbed};

/// Which map of the chain a [`TorusMap`] is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Linear,
    Fhat,
    Blended,
    Singular,
    Perturbed,
}

impl Provenance {
    /// Short tag: `A`, `fhat`, `f`, `F` or `perturbed`.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "A",
            Self::Fhat => "fhat",
            Self::Blended => "f",
            Self::Singular => "F",
            Self::Perturbed => "perturbed",
        }
    }
}

/// A `C¹` self-map of `T^n` with an analytic Jacobian.
///
/// Inputs may be any lift; outputs are canonical.
pub trait TorusMap: Send + Sync {
    fn dim(&self) -> usize;

    fn provenance(&self) -> Provenance;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn jacobian_into(&self, x: &[f64], jac: &mut DMatrix<f64>);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        self.jacobian_into(x, &mut jac);
        jac
    }
}

impl<T: TorusMap + ?Sized> TorusMap for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn provenance(&self) -> Provenance {
        (**self).provenance()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
    fn jacobian_into(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        (**self).jacobian_into(x, jac)
    }
}

impl<T: TorusMap + ?Sized> TorusMap for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn provenance(&self) -> Provenance {
        (**self).provenance()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
    fn jacobian_into(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        (**self).jacobian_into(x, jac)
    }
}

/// Everything needed to evaluate the maps: validated parameters, slice
/// layout, both families and the surgery profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub params: Params,
    pub layout: SliceLayout,
    pub f2: MapFamily,
    pub f1: MapFamily,
    pub psi: PsiSpec,
    pub phi: PhiSpec,
    /// Cutoff in the first `n-1` coordinates around `p~`.
    pub cutoff: BallCutoff,
}

impl Construction {
    pub fn new(params: Params) -> Result<Self> {
        let layout = SliceLayout::new(params.centers.clone(), params.r, params.m)?;
        let f2 = ifs::build_f2_with_a0(params.k, params.alpha, params.a0)?;
        let f1 = ifs::build_f1_with_slack(params.k, params.m_target, params.jac_slack, params.seed)?;
        let psi = PsiSpec::new(params.theta, params.l)?;
        let phi = PhiSpec::new(params.delta, params.theta)?;
        let cutoff = BallCutoff::new(params.p[..params.n - 1].to_vec(), params.l / 4.0, params.l / 2.0)?;
        Ok(Self { params, layout, f2, f1, psi, phi, cutoff })
    }

    /// Validates and builds in one go.
    pub fn from_raw(raw: &RawParams, mode: ValidationMode) -> Result<Self> {
        let params = params_validate(raw, mode).map_err(Error::Invalid)?;
        Self::new(params)
    }

    /// The default instance, shared.
    pub fn d3() -> Arc<Self> {
        Arc::new(Self::from_raw(&RawParams::d3(), ValidationMode::Empirical).expect("default instance is valid"))
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    /// Central-factor member driving slice `i`: `0..=k` from `F2`, then the
    /// two members of `F1`.
    pub fn slice_member(&self, i: usize) -> &Member {
        let k = self.params.k;
        if i <= k {
            &self.f2.members[i]
        } else {
            &self.f1.members[i - k - 1]
        }
    }

    /// Slice containing the unstable block and the zone tag.
    pub fn slice_index(&self, x_unstable: &[f64]) -> (Option<usize>, Zone) {
        self.layout.locate(x_unstable)
    }

    /// Fixed values of `x ↦ λx mod 2` on one unstable axis.
    pub fn fixed_points_a(&self) -> Vec<f64> {
        fixed_points_a(&self.params)
    }

    pub fn map(self: &Arc<Self>, kind: MapKind) -> EndoMap {
        EndoMap::new(Arc::clone(self), kind)
    }

    /// `f̂` on `K~ × T^k`.
    pub fn apply_fhat(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let m = self.m();
        let xr: Vec<f64> = x.iter().map(|&c| reduce_coord(c)).collect();
        let Some(i) = self.slice_index(&xr[..m]).0 else {
            return Err(Error::OutsideDomain);
        };
        let mut out = vec![0.0; n];
        let lambda = self.params.lambda_f();
        for j in 0..m {
            out[j] = reduce_coord(lambda * xr[j]);
        }
        self.slice_member(i).eval_into(&xr[m..], &mut out[m..]);
        Ok(out)
    }
}

/// All `2i/(λ-1) mod 2`, `i = 0..λ-2`.
pub fn fixed_points_a(params: &Params) -> Vec<f64> {
    let l1 = (params.lambda - 1) as f64;
    (0..params.lambda - 1).map(|i| reduce_coord(2.0 * i as f64 / l1)).collect()
}
