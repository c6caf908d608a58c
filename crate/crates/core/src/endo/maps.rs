use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Construction, Provenance, TorusMap};
use crate::torus::reduce_coord;

/// Largest `n` the stack-buffered evaluation supports.
pub(crate) const MAX_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapKind {
    /// `A(x, y) = (λx, y)`.
    Linear,
    /// `(λx, g_i(y))` on `K~_i × T^k`, extended by `A` elsewhere.
    Fhat,
    /// `f(x, y) = (λx, y + U(x)(f̂_2(y) - y))`.
    Blended,
    /// `F = f - φ(x_n) ψ(Σ_{j<n} x_j²) χ(x~) e_n`.
    Singular,
}

#[derive(Clone, Debug)]
pub struct EndoMap {
    ctx: Arc<Construction>,
    kind: MapKind,
}

/// Values of the surgery profiles at a point where the correction is active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurgeryTerms {
    pub phi: f64,
    pub dphi: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub chi: f64,
}

impl SurgeryTerms {
    /// `φ' ψ χ`; the determinant of `F` is `λ^m (1 - φ'ψχ)`.
    pub fn fold(&self) -> f64 {
        self.dphi * self.psi * self.chi
    }
}

impl EndoMap {
    pub fn new(ctx: Arc<Construction>, kind: MapKind) -> Self {
        assert!(ctx.params.n <= MAX_DIM, "n > {MAX_DIM} is not supported");
        Self { ctx, kind }
    }

    pub fn construction(&self) -> &Arc<Construction> {
        &self.ctx
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    /// Surgery terms at canonical `x`, with `∇χ` written to `grad_chi`
    /// (length `n-1`). `None` where the correction vanishes identically.
    pub fn surgery_terms(&self, x: &[f64], grad_chi: &mut [f64]) -> Option<SurgeryTerms> {
        let c = &self.ctx;
        let n = c.params.n;
        let z = x[n - 1];
        let (lo, hi) = c.phi.support();
        if z <= lo || z >= hi {
            return None;
        }
        let chi = c.cutoff.eval(&x[..n - 1], grad_chi);
        if chi == 0.0 {
            return None;
        }
        let s: f64 = x[..n - 1].iter().map(|v| v * v).sum();
        let (psi, dpsi) = c.psi.eval(s);
        if psi == 0.0 && dpsi == 0.0 {
            return None;
        }
        let (phi, dphi) = c.phi.eval(z);
        Some(SurgeryTerms { phi, dphi, psi, dpsi, chi })
    }

    /// Writes the central-block image for `f` and returns nothing else.
    #[inline]
    fn central_blended(&self, xr: &[f64], out: &mut [f64]) {
        let c = &self.ctx;
        let m = c.params.m;
        let n = c.params.n;
        let (y, out_c) = (&xr[m..n], &mut out[m..n]);
        match c.layout.locate(&xr[..m]).0 {
            None => out_c.copy_from_slice(y),
            Some(i) => {
                let mut grad = [0.0; MAX_DIM];
                let u = c.layout.eval_in(i, &xr[..m], &mut grad[..m]);
                let mut disp = [0.0; MAX_DIM];
                let mut diag = [0.0; MAX_DIM];
                c.slice_member(i).displacement_diag(y, &mut disp[..n - m], &mut diag[..n - m]);
                for a in 0..n - m {
                    out_c[a] = reduce_coord(y[a] + u * disp[a]);
                }
            }
        }
    }
}

impl TorusMap for EndoMap {
    fn dim(&self) -> usize {
        self.ctx.params.n
    }

    fn provenance(&self) -> Provenance {
        match self.kind {
            MapKind::Linear => Provenance::Linear,
            MapKind::Fhat => Provenance::Fhat,
            MapKind::Blended => Provenance::Blended,
            MapKind::Singular => Provenance::Singular,
        }
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.ctx;
        let n = c.params.n;
        let m = c.params.m;
        let mut buf = [0.0; MAX_DIM];
        let xr = &mut buf[..n];
        for (d, &s) in xr.iter_mut().zip(x) {
            *d = reduce_coord(s);
        }
        let lambda = c.params.lambda_f();
        for j in 0..m {
            out[j] = reduce_coord(lambda * xr[j]);
        }
        match self.kind {
            MapKind::Linear => out[m..n].copy_from_slice(&xr[m..n]),
            MapKind::Fhat => match c.layout.locate(&xr[..m]).0 {
                Some(i) => c.slice_member(i).eval_into(&xr[m..n], &mut out[m..n]),
                None => out[m..n].copy_from_slice(&xr[m..n]),
            },
            MapKind::Blended => self.central_blended(xr, out),
            MapKind::Singular => {
                self.central_blended(xr, out);
                let mut g = [0.0; MAX_DIM];
                if let Some(t) = self.surgery_terms(xr, &mut g[..n - 1]) {
                    out[n - 1] = reduce_coord(out[n - 1] - t.phi * t.psi * t.chi);
                }
            }
        }
    }

    fn jacobian_into(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let c = &self.ctx;
        let n = c.params.n;
        let m = c.params.m;
        let mut buf = [0.0; MAX_DIM];
        let xr = &mut buf[..n];
        for (d, &s) in xr.iter_mut().zip(x) {
            *d = reduce_coord(s);
        }
        jac.fill(0.0);
        let lambda = c.params.lambda_f();
        for j in 0..m {
            jac[(j, j)] = lambda;
        }
        for a in m..n {
            jac[(a, a)] = 1.0;
        }
        if self.kind == MapKind::Linear {
            return;
        }
        if let Some(i) = c.layout.locate(&xr[..m]).0 {
            let k = n - m;
            let mut disp = [0.0; MAX_DIM];
            let mut diag = [0.0; MAX_DIM];
            c.slice_member(i).displacement_diag(&xr[m..n], &mut disp[..k], &mut diag[..k]);
            if self.kind == MapKind::Fhat {
                for a in 0..k {
                    jac[(m + a, m + a)] = diag[a];
                }
            } else {
                let mut grad = [0.0; MAX_DIM];
                let u = c.layout.eval_in(i, &xr[..m], &mut grad[..m]);
                for a in 0..k {
                    for j in 0..m {
                        jac[(m + a, j)] = grad[j] * disp[a];
                    }
                    jac[(m + a, m + a)] = 1.0 + u * (diag[a] - 1.0);
                }
            }
        }
        if self.kind == MapKind::Singular {
            let mut g = [0.0; MAX_DIM];
            if let Some(t) = self.surgery_terms(xr, &mut g[..n - 1]) {
                for j in 0..n - 1 {
                    jac[(n - 1, j)] -= t.phi * (t.dpsi * 2.0 * xr[j] * t.chi + t.psi * g[j]);
                }
                jac[(n - 1, n - 1)] -= t.fold();
            }
        }
    }
}

/// `A(x)`: first `m` coordinates times `λ` mod 2, the rest unchanged.
pub fn apply_a(ctx: &Arc<Construction>, x: &[f64]) -> Vec<f64> {
    EndoMap::new(Arc::clone(ctx), MapKind::Linear).eval(x)
}
