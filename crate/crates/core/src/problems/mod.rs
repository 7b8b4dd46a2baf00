//! Constrained problems consumed by the adjoint engine, and the glue that
//! turns a problem plus a parameter point into a cost value or a gradient.

mod example1;
mod example2;
mod helmholtz;

pub use example1::{ex1_daz_dp, ex1_matrix, ex1_matrix_holo, ex1_rhs, Example1, EX1_DOMAIN};
pub use example2::{ex2_matrix, ex2_partials, ex2_residual, ex2_rhs, Example2, EX2_DOMAIN};
pub use helmholtz::{
    helmholtz_assemble, helmholtz_cost, helmholtz_solve, helmholtz_targets, HelmholtzGrid, HelmholtzProblem,
    HELMHOLTZ_K2,
};

use num_complex::Complex64;

use crate::adjoint::{
    gradient_adjoint_path, gradient_fully_holo, gradient_general, gradient_holo_x, gradient_linear, CostGradients,
    GradientPath, GradientReport, WirtingerPartials,
};
use crate::cxla::CMatrix;
use crate::wirtinger::TangentSpaceKind;
use crate::Error;

/// An equality constraint `g(x, p) = 0` that determines `x` from `p`.
pub trait ConstraintProblem {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn constraint_dim(&self) -> usize;
    fn tangent_kind(&self) -> TangentSpaceKind;

    /// The unique `x` with `g(x, p) = 0`.
    fn solve_state(&self, p: &[Complex64]) -> Result<Vec<Complex64>, Error>;

    /// `g(x, p)`.
    fn residual(&self, x: &[Complex64], p: &[Complex64]) -> Vec<Complex64>;

    fn partials(&self, x: &[Complex64], p: &[Complex64]) -> WirtingerPartials;

    /// `(A(p), ∂(A(p)·x)/∂p)` when the constraint has the form `A(p)·x − b`
    /// and `x` is holomorphic in `p`.
    fn linear_form(&self, _x: &[Complex64], _p: &[Complex64]) -> Option<(CMatrix, CMatrix)> {
        None
    }
}

/// A real-valued cost `f(x, p)`.
pub trait CostProblem {
    fn value(&self, x: &[Complex64], p: &[Complex64]) -> f64;
    fn gradients(&self, x: &[Complex64], p: &[Complex64]) -> CostGradients;
}

pub trait Problem: ConstraintProblem + CostProblem + Sync {
    fn name(&self) -> &'static str;
}

/// `p ↦ f(x(p), p)`.
pub fn objective<P: Problem + ?Sized>(problem: &P, p: &[Complex64]) -> Result<f64, Error> {
    let x = problem.solve_state(p)?;
    let v = problem.value(&x, p);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation { what: "objective" })
    }
}

/// Every gradient path whose preconditions hold at `(x, p)`.
pub fn applicable_paths<P: Problem + ?Sized>(problem: &P, x: &[Complex64], p: &[Complex64]) -> Vec<GradientPath> {
    let parts = problem.partials(x, p);
    let mut paths = vec![GradientPath::GeneralDirect, GradientPath::GeneralAdjoint];
    if parts.d1cg.is_zero() {
        paths.push(GradientPath::HoloInX);
        if parts.d2cg.is_zero() {
            paths.push(GradientPath::FullyHolo);
        }
    }
    if problem.linear_form(x, p).is_some() {
        paths.push(GradientPath::LinearConstraint);
    }
    paths
}

/// The cheapest applicable path.
pub fn preferred_path<P: Problem + ?Sized>(problem: &P, x: &[Complex64], p: &[Complex64]) -> GradientPath {
    let paths = applicable_paths(problem, x, p);
    [
        GradientPath::LinearConstraint,
        GradientPath::FullyHolo,
        GradientPath::HoloInX,
        GradientPath::GeneralAdjoint,
    ]
    .into_iter()
    .find(|c| paths.contains(c))
    .unwrap_or(GradientPath::GeneralAdjoint)
}

/// `∇ₚf` at `p` along `path`, or along the preferred path when `None`.
pub fn gradient<P: Problem + ?Sized>(
    problem: &P,
    p: &[Complex64],
    path: Option<GradientPath>,
) -> Result<GradientReport, Error> {
    let x = problem.solve_state(p)?;
    gradient_at_state(problem, &x, p, path)
}

pub fn gradient_at_state<P: Problem + ?Sized>(
    problem: &P,
    x: &[Complex64],
    p: &[Complex64],
    path: Option<GradientPath>,
) -> Result<GradientReport, Error> {
    let path = path.unwrap_or_else(|| preferred_path(problem, x, p));
    let kind = problem.tangent_kind();
    let cg = problem.gradients(x, p);
    match path {
        GradientPath::LinearConstraint => {
            let (a, daxdp) = problem
                .linear_form(x, p)
                .ok_or(Error::PathNotApplicable { path })?;
            gradient_linear(&a, &daxdp, &cg, kind)
        }
        GradientPath::GeneralDirect => gradient_general(&problem.partials(x, p), &cg, kind),
        GradientPath::GeneralAdjoint => gradient_adjoint_path(&problem.partials(x, p), &cg, kind),
        GradientPath::HoloInX => gradient_holo_x(&problem.partials(x, p), &cg, kind),
        GradientPath::FullyHolo => gradient_fully_holo(&problem.partials(x, p), &cg, kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::{fd_total_gradient, relative_error, FdConfig};
    use crate::wirtinger::to_real_coords;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn applicable_paths_per_problem() {
        let p1 = [c(0.1, 0.0), c(-0.2, 0.0)];
        let ex1 = Example1;
        let x = ex1.solve_state(&p1).unwrap();
        let paths = applicable_paths(&ex1, &x, &p1);
        assert!(paths.contains(&GradientPath::LinearConstraint));
        assert!(paths.contains(&GradientPath::FullyHolo));
        assert_eq!(preferred_path(&ex1, &x, &p1), GradientPath::LinearConstraint);

        let p2 = [c(0.2, 0.1)];
        let ex2 = Example2;
        let x = ex2.solve_state(&p2).unwrap();
        assert_eq!(
            applicable_paths(&ex2, &x, &p2),
            vec![GradientPath::GeneralDirect, GradientPath::GeneralAdjoint]
        );

        let helm = HelmholtzProblem::with_targets(HelmholtzGrid::new(16, HELMHOLTZ_K2).unwrap(), c(0.1, 0.0), c(0.2, 0.0))
            .unwrap();
        let p3 = [c(0.3, 0.4)];
        let x = helm.solve_state(&p3).unwrap();
        let paths = applicable_paths(&helm, &x, &p3);
        assert!(paths.contains(&GradientPath::HoloInX));
        assert!(!paths.contains(&GradientPath::FullyHolo));
        assert!(!paths.contains(&GradientPath::LinearConstraint));
    }

    #[test]
    fn linear_path_unavailable_for_nonlinear_problem() {
        let p = [c(0.2, 0.1)];
        assert!(matches!(
            gradient(&Example2, &p, Some(GradientPath::LinearConstraint)),
            Err(Error::PathNotApplicable { .. })
        ));
    }

    #[test]
    fn preferred_gradient_matches_fd_on_every_problem() {
        let helm = HelmholtzProblem::from_truth(HelmholtzGrid::new(40, HELMHOLTZ_K2).unwrap(), 200, c(0.5, 0.5)).unwrap();
        let cases: Vec<(&dyn Problem, Vec<Complex64>)> = vec![
            (&Example1, vec![c(0.3, 0.0), c(-0.2, 0.0)]),
            (&Example2, vec![c(0.25, -0.15)]),
            (&helm, vec![c(0.3, 0.4)]),
        ];
        for (problem, p) in cases {
            let report = gradient(problem, &p, None).unwrap();
            let kind = problem.tangent_kind();
            let fd = fd_total_gradient(|q| objective(problem, q), &p, kind, &FdConfig::default()).unwrap();
            let err = relative_error(&to_real_coords(&report.grad, kind), &fd, 1e-8);
            assert!(err < 1e-5, "{}: {err}", problem.name());
        }
    }
}
