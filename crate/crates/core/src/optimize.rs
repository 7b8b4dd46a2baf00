//! Steepest descent and BFGS with Armijo backtracking, run in realified
//! parameter coordinates. Every cost evaluation is counted, including
//! line-search probes and finite-difference probes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fdcheck::{fd_total_gradient, FdConfig};
use crate::problems::{gradient, objective, Problem};
use crate::wirtinger::{from_real_coords, to_real_coords, TangentSpaceKind};
use crate::Error;

/// Backtracks allowed per line search before giving up.
pub const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GradientDescent,
    Bfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSource {
    Adjoint,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub gradient_source: GradientSource,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    /// Step used when `gradient_source` is `FiniteDifference`.
    pub fd: FdConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Bfgs,
            gradient_source: GradientSource::Adjoint,
            max_iters: 200,
            grad_tol: 1e-9,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            fd: FdConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.armijo_c) {
            return Err(Error::InvalidConfig(format!("armijo_c must lie in (0, 1), got {}", self.armijo_c)));
        }
        if !open_unit(self.backtrack_factor) {
            return Err(Error::InvalidConfig(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("initial_step must be positive, got {}", self.initial_step)));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be non-negative, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// No Armijo-acceptable step was found; usually the cost has reached its
    /// round-off floor or the direction is not a descent direction.
    LineSearchFailure { iteration: usize, backtracks: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub p: Vec<Complex64>,
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerRun {
    pub final_p: Vec<Complex64>,
    pub final_cost: f64,
    pub n_cost_evals: usize,
    pub n_grad_evals: usize,
    /// Accepted iterates, starting with `p0`.
    pub trace: Vec<TracePoint>,
    pub termination: Termination,
}

impl OptimizerRun {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    /// Turns a line-search failure into an error.
    pub fn ensure_converged(self) -> Result<Self, Error> {
        match self.termination {
            Termination::LineSearchFailure { iteration, backtracks } => {
                Err(Error::LineSearchFailure { iteration, backtracks })
            }
            _ => Ok(self),
        }
    }
}

/// Minimizes `f(x(p), p)` over the parameters of `problem`.
pub fn minimize<P: Problem + ?Sized>(
    problem: &P,
    p0: &[Complex64],
    cfg: &OptimizerConfig,
) -> Result<OptimizerRun, Error> {
    minimize_fn(
        |p| objective(problem, p),
        |p| gradient(problem, p, None).map(|r| r.grad),
        p0,
        problem.tangent_kind(),
        cfg,
    )
}

/// Minimizes a cost given as closures. `grad` must return the engine-convention
/// gradient and is only called when the source is `Adjoint`.
pub fn minimize_fn(
    mut cost: impl FnMut(&[Complex64]) -> Result<f64, Error>,
    mut grad: impl FnMut(&[Complex64]) -> Result<Vec<Complex64>, Error>,
    p0: &[Complex64],
    kind: TangentSpaceKind,
    cfg: &OptimizerConfig,
) -> Result<OptimizerRun, Error> {
    cfg.validate()?;
    let mut ev = Evaluator { cost: &mut cost, grad: &mut grad, kind, cfg, n_cost: 0, n_grad: 0 };

    let mut x = to_real_coords(p0, kind);
    let d = x.len();
    let mut f = ev.cost(&x)?;
    if !f.is_finite() {
        return Err(Error::NonFiniteEvaluation { what: "initial cost" });
    }
    let mut g = ev.grad(&x)?;

    let mut h_inv = identity(d);
    let mut trace = vec![TracePoint { p: from_real_coords(&x, kind), cost: f, grad_norm: norm(&g) }];
    let mut termination = Termination::MaxIterations;

    for iter in 0..cfg.max_iters {
        if norm(&g) <= cfg.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut dir = match cfg.method {
            Method::GradientDescent => g.iter().map(|v| -v).collect(),
            Method::Bfgs => neg_matvec(&h_inv, &g),
        };
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            log::debug!("iteration {iter}: not a descent direction, resetting curvature");
            h_inv = identity(d);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }

        let mut alpha = cfg.initial_step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            match ev.cost(&trial) {
                Ok(ft) if ft.is_finite() && ft < f && ft <= f + cfg.armijo_c * alpha * slope => {
                    accepted = Some((trial, ft));
                    break;
                }
                Ok(_) | Err(Error::Linalg(_)) | Err(Error::NonFiniteEvaluation { .. }) => alpha *= cfg.backtrack_factor,
                Err(e) => return Err(e),
            }
        }
        let Some((x_new, f_new)) = accepted else {
            log::info!("line search exhausted at iteration {iter} with cost {f:.3e}");
            termination = Termination::LineSearchFailure { iteration: iter, backtracks: MAX_BACKTRACKS };
            break;
        };

        let g_new = ev.grad(&x_new)?;
        if cfg.method == Method::Bfgs {
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            bfgs_update(&mut h_inv, &s, &y, iter == 0);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        log::debug!("iteration {iter}: cost {f:.6e}, |grad| {:.3e}, step {alpha:.3e}", norm(&g));
        trace.push(TracePoint { p: from_real_coords(&x, kind), cost: f, grad_norm: norm(&g) });
    }

    if termination == Termination::MaxIterations && norm(&g) <= cfg.grad_tol {
        termination = Termination::GradientTolerance;
    }

    Ok(OptimizerRun {
        final_p: from_real_coords(&x, kind),
        final_cost: f,
        n_cost_evals: ev.n_cost,
        n_grad_evals: ev.n_grad,
        trace,
        termination,
    })
}

/// Counts evaluations and converts between realified and complex coordinates.
struct Evaluator<'a, C, G> {
    cost: &'a mut C,
    grad: &'a mut G,
    kind: TangentSpaceKind,
    cfg: &'a OptimizerConfig,
    n_cost: usize,
    n_grad: usize,
}

impl<C, G> Evaluator<'_, C, G>
where
    C: FnMut(&[Complex64]) -> Result<f64, Error>,
    G: FnMut(&[Complex64]) -> Result<Vec<Complex64>, Error>,
{
    fn cost(&mut self, x: &[f64]) -> Result<f64, Error> {
        self.n_cost += 1;
        (self.cost)(&from_real_coords(x, self.kind))
    }

    fn grad(&mut self, x: &[f64]) -> Result<Vec<f64>, Error> {
        self.n_grad += 1;
        let p = from_real_coords(x, self.kind);
        match self.cfg.gradient_source {
            GradientSource::Adjoint => Ok(to_real_coords(&(self.grad)(&p)?, self.kind)),
            GradientSource::FiniteDifference => {
                let (kind, fd) = (self.kind, self.cfg.fd);
                let (cost, n_cost) = (&mut *self.cost, &mut self.n_cost);
                fd_total_gradient(
                    |q| {
                        *n_cost += 1;
                        cost(q)
                    },
                    &p,
                    kind,
                    &fd,
                )
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn neg_matvec(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    h.iter().map(|row| -dot(row, g)).collect()
}

/// Inverse-Hessian update `H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ`, skipped when the
/// curvature condition `sᵀy > 0` fails numerically.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], first: bool) {
    let sy = dot(s, y);
    if !(sy > 1e-12 * norm(s) * norm(y)) {
        return;
    }
    let d = s.len();
    if first {
        let scale = sy / dot(y, y);
        for (i, row) in h.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { scale } else { 0.0 };
            }
        }
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
