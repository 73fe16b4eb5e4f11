//! Dominant spectral data of positive kernel operators under a rank-one
//! (Doeblin-type) minorization.
//!
//! A nonnegative kernel `K` on a discretized measure space is split as
//! `T = α u₀ ⊗ Φ + R` with `R ≥ 0`. The dominant eigenvalue of `T` is then the
//! unique zero above `ρ(R)` of the scalar function
//!
//! ```text
//! D(λ) = 1 − α Φ[(λI − R)⁻¹ u₀]
//! ```
//!
//! and the spectral projection is the rank-one residue of the factorized
//! resolvent at that zero. No general eigensolver is involved on the main
//! path; power iteration and characteristic polynomials are kept only as
//! independent oracles.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line interface live in the companion `doeblin` crate.
#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used throughout for validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod change_of_measure;
pub mod corrected;
pub mod doeblin;
mod error;
pub mod kernel;
pub mod linalg;
mod math;
pub mod matrix_pf;
pub mod measure;
pub mod mollified;
pub mod resolvent;
pub mod spectral;

pub use error::{Error, Result};
pub use kernel::{Kernel, PowerEstimate, SchurBound, SchurReport};
pub use linalg::{Lu, Matrix};
pub use measure::{GridFunction, MeasureSpace, QuadratureRule, SpaceKind, WeightFunctional};
