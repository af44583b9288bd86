//! Numerical verification of the prolongation connection for the
//! conformal-Killing operator on compatible 2-forms over
//! quaternionic-Kähler manifolds.
//!
//! The crate is layered bottom-up:
//!
//! * [`qalg`] – pointwise quaternionic and exterior algebra on `R^{4n}`.
//! * [`curvalg`] – algebraic curvature: the quaternionic-Kähler
//!   decomposition, the quaternionic Weyl tensor, the prolongation
//!   connection coefficients and its curvature.
//! * [`manifolds`] – chart models (flat `H^n`, an affine chart of `HP^n`)
//!   with finite-difference geometry.
//! * [`ckforms`] – conformal-Killing residuals, prolongation transport,
//!   holonomy dimension counts, Killing fields, the `S^2E` correspondence
//!   and the bracket of conformal-Killing forms.
//!
//! All tensors carry lowered indices unless stated otherwise; endomorphisms
//! carry one index up.

pub mod ckforms;
pub mod curvalg;
pub mod error;
pub mod exec;
pub mod fd;
pub mod manifolds;
pub mod qalg;
pub mod sampling;

pub use error::{QkError, Result};
pub use exec::Exec;
