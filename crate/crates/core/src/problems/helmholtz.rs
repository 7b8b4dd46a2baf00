//! 1-D Helmholtz `−u'' − k²u = sin(2πx)` on `[0, 1]` with Neumann data
//! `u'(0) = i·p` and `u'(1) = p̄³`, discretised by second-order finite differences.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::adjoint::{CostGradients, WirtingerPartials};
use crate::cxla::{CMatrix, Lu};
use crate::wirtinger::TangentSpaceKind;
use crate::Error;

use super::{ConstraintProblem, CostProblem, Problem};

pub const HELMHOLTZ_K2: f64 = 4.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `N + 2` equispaced nodes on `[0, 1]` with spacing `h = 1/(N+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzGrid {
    pub n: usize,
    pub h: f64,
    pub k2: f64,
}

impl HelmholtzGrid {
    pub fn new(n: usize, k2: f64) -> Result<Self, Error> {
        if n < 4 {
            return Err(Error::InvalidConfig(format!("Helmholtz grid needs N >= 4, got {n}")));
        }
        if !k2.is_finite() {
            return Err(Error::InvalidConfig(format!("k² must be finite, got {k2}")));
        }
        Ok(Self { n, h: 1.0 / (n as f64 + 1.0), k2 })
    }

    /// System dimension, `N + 2`.
    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n + 1 {
            1.0
        } else {
            j as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.node(j)).collect()
    }
}

/// The boundary values `(u'(0), u'(1)) = (i·p, p̄³)`.
fn neumann_data(p: Complex64) -> (Complex64, Complex64) {
    (I * p, p.conj().powi(3))
}

fn assemble_matrix(grid: &HelmholtzGrid) -> CMatrix {
    let d = grid.dim();
    let h = grid.h;
    let mut a = CMatrix::zeros(d, d);
    a[(0, 0)] = Complex64::from(-3.0 / (2.0 * h));
    a[(0, 1)] = Complex64::from(2.0 / h);
    a[(0, 2)] = Complex64::from(-1.0 / (2.0 * h));
    let inv_h2 = 1.0 / (h * h);
    for j in 1..d - 1 {
        a[(j, j - 1)] = Complex64::from(-inv_h2);
        a[(j, j)] = Complex64::from(2.0 * inv_h2 - grid.k2);
        a[(j, j + 1)] = Complex64::from(-inv_h2);
    }
    a[(d - 1, d - 1)] = Complex64::from(3.0 / (2.0 * h));
    a[(d - 1, d - 2)] = Complex64::from(-2.0 / h);
    a[(d - 1, d - 3)] = Complex64::from(1.0 / (2.0 * h));
    a
}

fn assemble_rhs(grid: &HelmholtzGrid, p: Complex64) -> Vec<Complex64> {
    let d = grid.dim();
    let mut b: Vec<Complex64> = (0..d).map(|j| Complex64::from((2.0 * PI * grid.node(j)).sin())).collect();
    let (left, right) = neumann_data(p);
    b[0] = left;
    b[d - 1] = right;
    b
}

/// `(A, b(p))` with `A u = b` the discrete boundary-value problem.
pub fn helmholtz_assemble(grid: &HelmholtzGrid, p: Complex64) -> (CMatrix, Vec<Complex64>) {
    (assemble_matrix(grid), assemble_rhs(grid, p))
}

pub fn helmholtz_solve(grid: &HelmholtzGrid, p: Complex64) -> Result<Vec<Complex64>, Error> {
    let (a, b) = helmholtz_assemble(grid, p);
    Ok(Lu::factor(&a)?.solve_vec(&b))
}

/// Endpoint values `(u(0), u(1))` of the solution on `truth`.
pub fn helmholtz_targets(truth: &HelmholtzGrid, p_true: Complex64) -> Result<(Complex64, Complex64), Error> {
    let u = helmholtz_solve(truth, p_true)?;
    Ok((u[0], u[u.len() - 1]))
}

/// `|u₀ − t₀|² + |u_end − t₁|²` and its state gradient.
pub fn helmholtz_cost(u: &[Complex64], target0: Complex64, target1: Complex64) -> (f64, Vec<Complex64>) {
    let last = u.len() - 1;
    let r0 = u[0] - target0;
    let r1 = u[last] - target1;
    let mut g1 = vec![Complex64::new(0.0, 0.0); u.len()];
    g1[0] = 2.0 * r0;
    g1[last] += 2.0 * r1;
    (r0.norm_sqr() + r1.norm_sqr(), g1)
}

/// Inverse problem for `p` given endpoint targets; the factorisation of `A` is reused.
#[derive(Debug, Clone)]
pub struct HelmholtzProblem {
    pub grid: HelmholtzGrid,
    pub target0: Complex64,
    pub target1: Complex64,
    a: CMatrix,
    lu: Lu,
}

impl HelmholtzProblem {
    pub fn with_targets(grid: HelmholtzGrid, target0: Complex64, target1: Complex64) -> Result<Self, Error> {
        let a = assemble_matrix(&grid);
        let lu = Lu::factor(&a)?;
        Ok(Self { grid, target0, target1, a, lu })
    }

    /// Targets read off a solve on an `truth_n` grid at `p_true`.
    pub fn from_truth(grid: HelmholtzGrid, truth_n: usize, p_true: Complex64) -> Result<Self, Error> {
        let truth = HelmholtzGrid::new(truth_n, grid.k2)?;
        let (t0, t1) = helmholtz_targets(&truth, p_true)?;
        Self::with_targets(grid, t0, t1)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }
}

impl ConstraintProblem for HelmholtzProblem {
    fn state_dim(&self) -> usize {
        self.grid.dim()
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn constraint_dim(&self) -> usize {
        self.grid.dim()
    }

    fn tangent_kind(&self) -> TangentSpaceKind {
        TangentSpaceKind::ComplexHilbert
    }

    fn solve_state(&self, p: &[Complex64]) -> Result<Vec<Complex64>, Error> {
        if p.len() != 1 {
            return Err(Error::DimensionMismatch { what: "helmholtz parameter", expected: 1, got: p.len() });
        }
        Ok(self.lu.solve_vec(&assemble_rhs(&self.grid, p[0])))
    }

    fn residual(&self, x: &[Complex64], p: &[Complex64]) -> Vec<Complex64> {
        let au = self.a.matvec(x).expect("state matches grid");
        au.iter().zip(assemble_rhs(&self.grid, p[0])).map(|(a, b)| a - b).collect()
    }

    fn partials(&self, _x: &[Complex64], p: &[Complex64]) -> WirtingerPartials {
        let d = self.grid.dim();
        let mut d2g = CMatrix::zeros(d, 1);
        d2g[(0, 0)] = -I;
        let mut d2cg = CMatrix::zeros(d, 1);
        d2cg[(d - 1, 0)] = -3.0 * p[0].conj().powi(2);
        WirtingerPartials {
            d1g: self.a.clone(),
            d1cg: CMatrix::zeros(d, d),
            d2g,
            d2cg,
        }
    }
}

impl CostProblem for HelmholtzProblem {
    fn value(&self, x: &[Complex64], _p: &[Complex64]) -> f64 {
        helmholtz_cost(x, self.target0, self.target1).0
    }

    fn gradients(&self, x: &[Complex64], _p: &[Complex64]) -> CostGradients {
        CostGradients {
            g1: helmholtz_cost(x, self.target0, self.target1).1,
            g2: vec![Complex64::new(0.0, 0.0)],
        }
    }
}

impl Problem for HelmholtzProblem {
    fn name(&self) -> &'static str {
        "helmholtz"
    }
}
