//! CR-calculus helpers for real-valued functions of complex arguments.
//!
//! The library fixes the inner product `⟨a, b⟩ = Σ a_k·conj(b_k)`. With that
//! choice the gradient of a real-valued `f` is `∇f = 2·conj(∂f/∂z)` and the
//! real directional derivative is `df[v] = Re⟨∇f, v⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cxla::inner;
use crate::Error;

/// Whether the parameter tangent space is real or complex.
///
/// Real parameters are stored as complex numbers with zero imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TangentSpaceKind {
    RealHilbert,
    ComplexHilbert,
}

impl TangentSpaceKind {
    /// Number of real coordinates carried by `m` parameters.
    pub fn real_dim(self, m: usize) -> usize {
        match self {
            TangentSpaceKind::RealHilbert => m,
            TangentSpaceKind::ComplexHilbert => 2 * m,
        }
    }
}

/// `∇f = 2·conj(∂f/∂z)` for real-valued `f`.
pub fn grad_from_partial(dfdz: &[Complex64]) -> Vec<Complex64> {
    dfdz.iter().map(|d| 2.0 * d.conj()).collect()
}

/// Inverse of [`grad_from_partial`].
pub fn partial_from_grad(grad: &[Complex64]) -> Vec<Complex64> {
    grad.iter().map(|g| g.conj() / 2.0).collect()
}

/// `Re⟨grad, v⟩`, the real change of `f` along `v`.
pub fn directional_derivative(grad: &[Complex64], v: &[Complex64]) -> Result<f64, Error> {
    if grad.len() != v.len() {
        return Err(Error::DimensionMismatch {
            what: "directional_derivative",
            expected: grad.len(),
            got: v.len(),
        });
    }
    Ok(inner(grad, v).re)
}

/// `[Re(grad); Im(grad)]`.
pub fn realify(grad: &[Complex64]) -> Vec<f64> {
    grad.iter().map(|z| z.re).chain(grad.iter().map(|z| z.im)).collect()
}

/// Inverse of [`realify`]; `coords` must have even length.
pub fn complexify(coords: &[f64]) -> Vec<Complex64> {
    assert!(coords.len().is_multiple_of(2), "complexify needs [re; im] layout");
    let m = coords.len() / 2;
    (0..m).map(|k| Complex64::new(coords[k], coords[m + k])).collect()
}

/// Elementwise real part, as a complex vector with zero imaginary parts.
pub fn project_real(grad: &[Complex64]) -> Vec<Complex64> {
    grad.iter().map(|z| Complex64::new(z.re, 0.0)).collect()
}

/// Realified coordinates of a parameter vector (or gradient) under `kind`:
/// real parts only for real spaces, `[Re; Im]` for complex ones.
pub fn to_real_coords(p: &[Complex64], kind: TangentSpaceKind) -> Vec<f64> {
    match kind {
        TangentSpaceKind::RealHilbert => p.iter().map(|z| z.re).collect(),
        TangentSpaceKind::ComplexHilbert => realify(p),
    }
}

pub fn from_real_coords(coords: &[f64], kind: TangentSpaceKind) -> Vec<Complex64> {
    match kind {
        TangentSpaceKind::RealHilbert => coords.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        TangentSpaceKind::ComplexHilbert => complexify(coords),
    }
}
