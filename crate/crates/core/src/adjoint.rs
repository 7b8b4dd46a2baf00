//! Generalized adjoint engine.
//!
//! Given the four Wirtinger partials of a constraint `g(x, p) = 0` and the
//! cost gradients `∇₁f`, `∇₂f`, this module computes `∇ₚf` along several
//! algebraically equivalent routes:
//!
//! * [`gradient_general`]: solve the block system
//!   `[[∂₁g, ∂₁ᶜg], [conj ∂₁ᶜg, conj ∂₁g]]·[∂x/∂p; ∂x̄/∂p] = −[∂₂g; conj ∂₂ᶜg]`
//!   and contract with the cost gradients.
//! * [`gradient_adjoint_path`]: solve the conjugate-transposed block system
//!   for the adjoint variables `(λ₁, λ₂)` instead; one solve regardless of
//!   the parameter count.
//! * [`gradient_holo_x`], [`gradient_fully_holo`], [`gradient_linear`]:
//!   reductions for constraints holomorphic in the state, in everything,
//!   and of the form `A(p)·x − b`.
//!
//! Non-square block systems (more complex constraint equations than state
//! unknowns) are solved by least squares with a consistency gate, and their
//! adjoint counterparts by minimum norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cxla::{self, norm2, CMatrix, LinalgError, Lu};
use crate::wirtinger::{project_real, TangentSpaceKind};
use crate::Error;

/// Relative least-squares residual above which a block system is declared
/// inconsistent.
pub const CONSISTENCY_RTOL: f64 = 1e-8;
/// Condition estimate above which a report carries an ill-conditioning warning.
pub const CONDITION_WARNING: f64 = 1e10;
/// Relative mismatch above which `λ₁ ≠ conj(λ₂)` is flagged.
pub const CONJUGATE_PAIR_RTOL: f64 = 1e-8;

/// The four constraint Jacobians at a point: `∂₁g`, `∂₁ᶜg` (q×n) and
/// `∂₂g`, `∂₂ᶜg` (q×m).
#[derive(Debug, Clone)]
pub struct WirtingerPartials {
    pub d1g: CMatrix,
    pub d1cg: CMatrix,
    pub d2g: CMatrix,
    pub d2cg: CMatrix,
}

impl WirtingerPartials {
    pub fn new(d1g: CMatrix, d1cg: CMatrix, d2g: CMatrix, d2cg: CMatrix) -> Result<Self, Error> {
        let parts = Self { d1g, d1cg, d2g, d2cg };
        parts.validate()?;
        Ok(parts)
    }

    fn validate(&self) -> Result<(), Error> {
        let q = self.d1g.rows();
        let n = self.d1g.cols();
        let m = self.d2g.cols();
        let checks = [
            ("d1cg", self.d1cg.shape(), (q, n)),
            ("d2g rows", (self.d2g.rows(), m), (q, m)),
            ("d2cg", self.d2cg.shape(), (q, m)),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::Linalg(LinalgError::DimensionMismatch {
                    op: what,
                    expected,
                    got,
                }));
            }
        }
        Ok(())
    }

    pub fn constraint_dim(&self) -> usize {
        self.d1g.rows()
    }

    pub fn state_dim(&self) -> usize {
        self.d1g.cols()
    }

    pub fn param_dim(&self) -> usize {
        self.d2g.cols()
    }
}

/// `∇₁f` (state) and `∇₂f` (parameter) of a real-valued cost. `∇₁ᶜf` is
/// implied as `conj(∇₁f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradients {
    pub g1: Vec<Complex64>,
    pub g2: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct StateSensitivities {
    pub dxdp: CMatrix,
    pub dxbardp: CMatrix,
}

/// Adjoint variables `λ̃₁`, `λ̃₂` of the Lagrangian formulation.
#[derive(Debug, Clone)]
pub struct AdjointVariables {
    pub lam1: Vec<Complex64>,
    pub lam2: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientPath {
    GeneralDirect,
    GeneralAdjoint,
    HoloInX,
    FullyHolo,
    LinearConstraint,
}

impl GradientPath {
    pub fn name(self) -> &'static str {
        match self {
            GradientPath::GeneralDirect => "general_direct",
            GradientPath::GeneralAdjoint => "general_adjoint",
            GradientPath::HoloInX => "holo_in_x",
            GradientPath::FullyHolo => "fully_holo",
            GradientPath::LinearConstraint => "linear_constraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    IllConditioned { estimate: f64 },
    ConjugatePairViolation { deviation: f64 },
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub grad: Vec<Complex64>,
    pub path: GradientPath,
    /// `max |M·S − rhs|` of whichever linear system the path solved.
    pub block_residual: f64,
    pub tangent_kind: TangentSpaceKind,
    pub condition_estimate: f64,
    pub warnings: Vec<Warning>,
}

/// Block matrix `M` (2q×2n) and right-hand side `rhs` (2q×m) of the
/// sensitivity system `M·[∂x/∂p; ∂x̄/∂p] = rhs`.
pub fn assemble_block(parts: &WirtingerPartials) -> (CMatrix, CMatrix) {
    let m = CMatrix::block2x2(&parts.d1g, &parts.d1cg, &parts.d1cg.conj(), &parts.d1g.conj())
        .expect("validated partials tile");
    let rhs = CMatrix::vstack(&parts.d2g, &parts.d2cg.conj())
        .expect("validated partials tile")
        .neg();
    (m, rhs)
}

struct Solved {
    x: CMatrix,
    residual: f64,
    condition: f64,
}

/// Square systems by LU; tall systems by least squares, gated on the
/// relative residual.
fn solve_block(m: &CMatrix, rhs: &CMatrix) -> Result<Solved, Error> {
    if m.is_square() {
        let lu = Lu::factor(m)?;
        let x = lu.solve(rhs)?;
        let residual = m.matmul(&x)?.sub(rhs)?.max_abs();
        return Ok(Solved {
            x,
            residual,
            condition: lu.condition_estimate(),
        });
    }
    if m.rows() < m.cols() {
        // More unknowns than equations: x(p) is not locally determined.
        return Err(Error::Linalg(LinalgError::RankDeficient { column: m.rows() }));
    }
    let (x, residual, qr) = cxla::lstsq_with_qr(m, rhs)?;
    let threshold = CONSISTENCY_RTOL * rhs.max_abs();
    if residual > threshold {
        return Err(Error::InconsistentSystem { residual, threshold });
    }
    Ok(Solved {
        x,
        residual,
        condition: m.norm1() * qr.r_inverse_norm1_estimate(),
    })
}

fn sensitivities_with_diagnostics(parts: &WirtingerPartials) -> Result<(StateSensitivities, Solved), Error> {
    let (m, rhs) = assemble_block(parts);
    let solved = solve_block(&m, &rhs)?;
    let n = parts.state_dim();
    let sens = StateSensitivities {
        dxdp: solved.x.row_slice(0, n),
        dxbardp: solved.x.row_slice(n, 2 * n),
    };
    Ok((sens, solved))
}

/// Solves the block system for `(∂x/∂p, ∂x̄/∂p)`.
pub fn solve_sensitivities(parts: &WirtingerPartials) -> Result<StateSensitivities, Error> {
    sensitivities_with_diagnostics(parts).map(|(s, _)| s)
}

fn check_cost_dims(parts: &WirtingerPartials, cg: &CostGradients) -> Result<(), Error> {
    if cg.g1.len() != parts.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "cost gradient g1",
            expected: parts.state_dim(),
            got: cg.g1.len(),
        });
    }
    if cg.g2.len() != parts.param_dim() {
        return Err(Error::DimensionMismatch {
            what: "cost gradient g2",
            expected: parts.param_dim(),
            got: cg.g2.len(),
        });
    }
    Ok(())
}

/// `(∂x/∂p)ᴴ·∇₁f + (∂x̄/∂p)ᴴ·conj(∇₁f) + ∇₂f`.
pub fn contract_sensitivities(sens: &StateSensitivities, cg: &CostGradients) -> Vec<Complex64> {
    let g1c: Vec<Complex64> = cg.g1.iter().map(|z| z.conj()).collect();
    let a = sens
        .dxdp
        .conj_transpose()
        .matvec(&cg.g1)
        .expect("sensitivity rows match state dimension");
    let b = sens
        .dxbardp
        .conj_transpose()
        .matvec(&g1c)
        .expect("sensitivity rows match state dimension");
    a.iter().zip(&b).zip(&cg.g2).map(|((x, y), z)| x + y + z).collect()
}

fn finish(
    grad: Vec<Complex64>,
    path: GradientPath,
    block_residual: f64,
    condition_estimate: f64,
    kind: TangentSpaceKind,
    mut warnings: Vec<Warning>,
) -> GradientReport {
    if condition_estimate > CONDITION_WARNING || !condition_estimate.is_finite() {
        log::warn!(
            "{}: condition estimate {condition_estimate:.3e} exceeds {CONDITION_WARNING:.0e}",
            path.name()
        );
        warnings.push(Warning::IllConditioned {
            estimate: condition_estimate,
        });
    }
    let grad = match kind {
        TangentSpaceKind::RealHilbert => project_real(&grad),
        TangentSpaceKind::ComplexHilbert => grad,
    };
    GradientReport {
        grad,
        path,
        block_residual,
        tangent_kind: kind,
        condition_estimate,
        warnings,
    }
}

/// `∇ₚf` through the explicit state sensitivities.
pub fn gradient_general(
    parts: &WirtingerPartials,
    cg: &CostGradients,
    kind: TangentSpaceKind,
) -> Result<GradientReport, Error> {
    check_cost_dims(parts, cg)?;
    let (sens, solved) = sensitivities_with_diagnostics(parts)?;
    let grad = contract_sensitivities(&sens, cg);
    Ok(finish(
        grad,
        GradientPath::GeneralDirect,
        solved.residual,
        solved.condition,
        kind,
        Vec::new(),
    ))
}

struct AdjointSolve {
    vars: AdjointVariables,
    residual: f64,
    condition: f64,
}

fn adjoint_solve(parts: &WirtingerPartials, cg: &CostGradients) -> Result<AdjointSolve, Error> {
    let (m, _) = assemble_block(parts);
    let madj = m.conj_transpose();
    let g1c: Vec<Complex64> = cg.g1.iter().map(|z| z.conj()).collect();
    let mut stacked = cg.g1.clone();
    stacked.extend_from_slice(&g1c);
    let rhs = CMatrix::column(&stacked);

    let (lam, condition) = if madj.is_square() {
        let lu = Lu::factor(&madj)?;
        (lu.solve(&rhs)?, lu.condition_estimate())
    } else if madj.rows() < madj.cols() {
        let (lam, qr) = cxla::minnorm_with_qr(&madj, &rhs)?;
        (lam, madj.norm1() * qr.r_inverse_norm1_estimate())
    } else {
        return Err(Error::Linalg(LinalgError::RankDeficient { column: madj.cols() }));
    };
    let residual = madj.matmul(&lam)?.sub(&rhs)?.max_abs();
    let q = parts.constraint_dim();
    let lam = lam.into_data();
    Ok(AdjointSolve {
        vars: AdjointVariables {
            lam1: lam[..q].to_vec(),
            lam2: lam[q..].to_vec(),
        },
        residual,
        condition,
    })
}

/// Solves `Mᴴ·[λ̃₁; λ̃₂] = [∇₁f; conj ∇₁f]`, by minimum norm when `Mᴴ` is wide.
pub fn solve_adjoint_variables(parts: &WirtingerPartials, cg: &CostGradients) -> Result<AdjointVariables, Error> {
    check_cost_dims(parts, cg)?;
    adjoint_solve(parts, cg).map(|s| s.vars)
}

/// `∇ₚf` through the adjoint variables: `(−[∂₂g; conj ∂₂ᶜg])ᴴ·λ + ∇₂f`.
pub fn gradient_adjoint_path(
    parts: &WirtingerPartials,
    cg: &CostGradients,
    kind: TangentSpaceKind,
) -> Result<GradientReport, Error> {
    check_cost_dims(parts, cg)?;
    let solved = adjoint_solve(parts, cg)?;
    let AdjointVariables { lam1, lam2 } = &solved.vars;

    let mut warnings = Vec::new();
    let deviation: f64 = lam1
        .iter()
        .zip(lam2)
        .map(|(a, b)| (a - b.conj()).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if deviation > CONJUGATE_PAIR_RTOL * norm2(lam1) {
        log::warn!("adjoint variables violate lam1 = conj(lam2) by {deviation:.3e}");
        warnings.push(Warning::ConjugatePairViolation { deviation });
    }

    let (_, rhs) = assemble_block(parts);
    let mut lam = lam1.clone();
    lam.extend_from_slice(lam2);
    // rhs already carries the minus sign.
    let contrib = rhs.conj_transpose().matvec(&lam)?;
    let grad = contrib.iter().zip(&cg.g2).map(|(a, b)| a + b).collect();
    Ok(finish(
        grad,
        GradientPath::GeneralAdjoint,
        solved.residual,
        solved.condition,
        kind,
        warnings,
    ))
}

/// Constraint holomorphic in the state (`∂₁ᶜg = 0`): the block system
/// decouples into `∂₁g·∂x/∂p = −∂₂g` and `conj(∂₁g)·∂x̄/∂p = −conj(∂₂ᶜg)`.
pub fn gradient_holo_x(
    parts: &WirtingerPartials,
    cg: &CostGradients,
    kind: TangentSpaceKind,
) -> Result<GradientReport, Error> {
    check_cost_dims(parts, cg)?;
    if !parts.d1cg.is_zero() {
        return Err(Error::NotHolomorphicInState {
            norm: parts.d1cg.frobenius(),
        });
    }
    let lu = Lu::factor(&parts.d1g)?;
    let rhs_x = parts.d2g.neg();
    let dxdp = lu.solve(&rhs_x)?;
    // conj(A)·Y = −conj(B)  ⇔  A·conj(Y) = −B
    let dxbardp = lu.solve(&parts.d2cg.neg())?.conj();
    let residual = parts
        .d1g
        .matmul(&dxdp)?
        .sub(&rhs_x)?
        .max_abs()
        .max(parts.d1g.conj().matmul(&dxbardp)?.add(&parts.d2cg.conj())?.max_abs());
    let grad = contract_sensitivities(&StateSensitivities { dxdp, dxbardp }, cg);
    Ok(finish(
        grad,
        GradientPath::HoloInX,
        residual,
        lu.condition_estimate(),
        kind,
        Vec::new(),
    ))
}

/// Constraint holomorphic in state and parameter with `x` holomorphic in
/// `p`: `∂x/∂p = −(∂₁g)⁻¹·∂₂g`, `∂x̄/∂p = 0`.
pub fn gradient_fully_holo(
    parts: &WirtingerPartials,
    cg: &CostGradients,
    kind: TangentSpaceKind,
) -> Result<GradientReport, Error> {
    check_cost_dims(parts, cg)?;
    if !parts.d1cg.is_zero() {
        return Err(Error::NotHolomorphicInState {
            norm: parts.d1cg.frobenius(),
        });
    }
    if !parts.d2cg.is_zero() {
        return Err(Error::NotHolomorphicInParameter {
            norm: parts.d2cg.frobenius(),
        });
    }
    let lu = Lu::factor(&parts.d1g)?;
    let rhs = parts.d2g.neg();
    let dxdp = lu.solve(&rhs)?;
    let residual = parts.d1g.matmul(&dxdp)?.sub(&rhs)?.max_abs();
    let n = parts.state_dim();
    let m = parts.param_dim();
    let grad = contract_sensitivities(
        &StateSensitivities {
            dxdp,
            dxbardp: CMatrix::zeros(n, m),
        },
        cg,
    );
    Ok(finish(
        grad,
        GradientPath::FullyHolo,
        residual,
        lu.condition_estimate(),
        kind,
        Vec::new(),
    ))
}

/// Linear constraint `A(p)·x − b` with `x` holomorphic in `p`: solve
/// `Aᴴ·λ = ∇₁f` once, then `∇ₚf = (−∂(A x)/∂p)ᴴ·λ + ∇₂f`.
///
/// `daxdp` is the q×m Jacobian of `A(p)·x` in `p` at fixed `x`.
pub fn gradient_linear(
    a: &CMatrix,
    daxdp: &CMatrix,
    cg: &CostGradients,
    kind: TangentSpaceKind,
) -> Result<GradientReport, Error> {
    if cg.g1.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            what: "cost gradient g1",
            expected: a.cols(),
            got: cg.g1.len(),
        });
    }
    if daxdp.rows() != a.rows() || cg.g2.len() != daxdp.cols() {
        return Err(Error::DimensionMismatch {
            what: "daxdp",
            expected: a.rows(),
            got: daxdp.rows(),
        });
    }
    let lu = Lu::factor(a)?;
    let lam = lu.solve_conj_transpose_vec(&cg.g1);
    let residual = a
        .conj_transpose()
        .matvec(&lam)?
        .iter()
        .zip(&cg.g1)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let contrib = daxdp.neg().conj_transpose().matvec(&lam)?;
    let grad = contrib.iter().zip(&cg.g2).map(|(x, y)| x + y).collect();
    Ok(finish(
        grad,
        GradientPath::LinearConstraint,
        residual,
        lu.condition_estimate(),
        kind,
        Vec::new(),
    ))
}
