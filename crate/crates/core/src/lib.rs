//! Steepest-ascent gradients of real-valued costs under complex equality
//! constraints that need not be holomorphic in either the state or the
//! parameter.
//!
//! The gradient convention throughout is `∇f = 2·conj(∂f/∂z)` with the inner
//! product `⟨a, b⟩ = Σ aₖ·conj(bₖ)`, so that `df[v] = Re⟨∇f, v⟩`.
//!
//! ```
//! use cr_adjoint::problems::{gradient, Example1};
//! use num_complex::Complex64;
//!
//! let p = [Complex64::new(0.1, 0.0), Complex64::new(0.1, 0.0)];
//! let report = gradient(&Example1, &p, None).unwrap();
//! assert_eq!(report.grad.len(), 2);
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod cxla;
pub mod fdcheck;
pub mod optimize;
pub mod problems;
pub mod report;
pub mod wirtinger;

pub use num_complex::Complex64;

use adjoint::GradientPath;
use cxla::LinalgError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("sensitivity system is inconsistent: least-squares residual {residual:.3e} exceeds {threshold:.3e}")]
    InconsistentSystem { residual: f64, threshold: f64 },

    #[error("constraint is not holomorphic in the state (max |∂g/∂x̄| = {norm:.3e})")]
    NotHolomorphicInState { norm: f64 },

    #[error("constraint is not holomorphic in the parameter (max |∂g/∂p̄| = {norm:.3e})")]
    NotHolomorphicInParameter { norm: f64 },

    #[error("gradient path `{}` does not apply to this problem", path.name())]
    PathNotApplicable { path: GradientPath },

    #[error("non-finite value produced by {what}")]
    NonFiniteEvaluation { what: &'static str },

    #[error("line search failed at iteration {iteration} after {backtracks} backtracks")]
    LineSearchFailure { iteration: usize, backtracks: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported schema `{found}` (expected major `{expected}`)")]
    UnsupportedSchema { found: String, expected: &'static str },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
