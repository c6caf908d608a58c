//! Construction and verification of robustly transitive singular
//! endomorphisms of the flat torus `T^n = (R/[-1,1])^n`.
//!
//! The crate builds the chain `A -> f -> F`:
//!
//! * `A` is the linear expanding-times-identity map `(λx, y)`,
//! * `f` blends `A` with a blending region made of `k + 3` slices on which the
//!   central factor is driven by an iterated function system,
//! * `F` adds a localized surgery that creates a persistent critical set.
//!
//! Every checkable property of the construction (cone invariance, expansion,
//! determinant identities, persistence of the critical set, inradius growth of
//! the shrinking family, transitivity surrogates) has a numerical check here,
//! and the key inequalities also have interval-arithmetic certificates in
//! [`rigor`].
//!
//! Sampling sweeps run on rayon when the `parallel` feature is enabled (the
//! default) and fall back to a sequential loop otherwise; see [`exec`].

pub mod endo;
pub mod error;
pub mod exec;
pub mod ifs;
pub mod probes;
pub mod profiles;
pub mod rigor;
pub mod singular;
pub mod tangent;
pub mod torus;

pub use endo::{Construction, EndoMap, MapKind, Params, RawParams, TorusMap, ValidationMode};
pub use error::{Error, Result};
pub use torus::{Box as TorusBox, TangentVector, TorusPoint};
