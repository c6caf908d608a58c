use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Provenance, TorusMap};
use crate::exec;
use crate::torus::reduce_coord;

/// `Φ(x) = Σ_t a_t sin(π ⟨k_t, x⟩ + φ_t) e_{c_t}` with integer wave vectors,
/// scaled so that `sup ‖Φ‖ ≤ ε` and `sup ‖DΦ‖ ≤ ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    pub n: usize,
    pub seed: u64,
    pub eps: f64,
    pub degree: i32,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub amplitude: f64,
    pub wave: Vec<i32>,
    pub phase: f64,
    pub component: usize,
}

impl PerturbationField {
    /// Random field with `3n` terms of degree at most `degree`.
    pub fn random(n: usize, eps: f64, degree: i32, seed: u64) -> Self {
        let mut rng = exec::rng_for(seed, 0x9E27);
        let count = 3 * n;
        let degree = degree.max(1);
        let mut terms = Vec::with_capacity(count);
        for t in 0..count {
            let mut wave: Vec<i32> = (0..n).map(|_| rng.gen_range(-degree..=degree)).collect();
            if wave.iter().all(|&w| w == 0) {
                wave[t % n] = 1;
            }
            terms.push(Term {
                amplitude: rng.gen_range(-1.0..1.0),
                wave,
                phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                component: t % n,
            });
        }
        let mut field = Self { n, seed, eps, degree, terms };
        let (c0, c1) = field.unit_bounds();
        let scale = if eps > 0.0 { eps / c0.max(c1) } else { 0.0 };
        for t in &mut field.terms {
            t.amplitude *= scale;
        }
        field
    }

    pub fn zero(n: usize) -> Self {
        Self { n, seed: 0, eps: 0.0, degree: 0, terms: Vec::new() }
    }

    /// Upper bounds on `sup ‖Φ‖` and `sup ‖DΦ‖` (Frobenius).
    pub fn unit_bounds(&self) -> (f64, f64) {
        let mut c0 = vec![0.0; self.n];
        let mut c1 = vec![0.0; self.n * self.n];
        for t in &self.terms {
            c0[t.component] += t.amplitude.abs();
            for (j, &w) in t.wave.iter().enumerate() {
                c1[t.component * self.n + j] += t.amplitude.abs() * std::f64::consts::PI * (w as f64).abs();
            }
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm(&c0), norm(&c1))
    }

    /// Adds `Φ(x)` to `out`.
    pub fn add_value(&self, x: &[f64], out: &mut [f64]) {
        for t in &self.terms {
            out[t.component] += t.amplitude * self.argument(t, x).sin();
        }
    }

    /// Adds `DΦ(x)` to `jac`.
    pub fn add_jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        for t in &self.terms {
            let c = t.amplitude * std::f64::consts::PI * self.argument(t, x).cos();
            for (j, &w) in t.wave.iter().enumerate() {
                jac[(t.component, j)] += c * w as f64;
            }
        }
    }

    #[inline]
    fn argument(&self, t: &Term, x: &[f64]) -> f64 {
        let dot: f64 = t.wave.iter().zip(x).map(|(&w, &xi)| w as f64 * xi).sum();
        std::f64::consts::PI * dot + t.phase
    }
}

/// `map + Φ`.
#[derive(Clone, Debug)]
pub struct Perturbed<M> {
    pub base: M,
    pub field: PerturbationField,
}

pub fn perturb<M: TorusMap>(base: M, field: PerturbationField) -> Perturbed<M> {
    Perturbed { base, field }
}

impl<M: TorusMap> TorusMap for Perturbed<M> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn provenance(&self) -> Provenance {
        Provenance::Perturbed
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.eval_into(x, out);
        if self.field.terms.is_empty() {
            return;
        }
        self.field.add_value(x, out);
        for v in out.iter_mut() {
            *v = reduce_coord(*v);
        }
    }

    fn jacobian_into(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        self.base.jacobian_into(x, jac);
        self.field.add_jacobian(x, jac);
    }
}
