//! A constraint that is non-holomorphic in both the state `z ∈ ℂ²` and the
//! parameter `p ∈ ℂ`. The matrix is assembled from `Re p`, `Im p` and `|p|²`
//! and acts on `(Re z₁, Im z₁, z₂)`.

use num_complex::Complex64;

use crate::adjoint::{CostGradients, WirtingerPartials};
use crate::cxla::{CMatrix, Lu};
use crate::wirtinger::TangentSpaceKind;
use crate::Error;

use super::{ConstraintProblem, CostProblem, Problem};

/// Square `[-0.5, 0.5]²` in the (Re p, Im p) plane.
pub const EX2_DOMAIN: [f64; 2] = [-0.5, 0.5];

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn ex2_matrix(p: Complex64) -> CMatrix {
    let (x, y) = (p.re, p.im);
    CMatrix::from_real_rows(&[
        [1.0 - y * y, 5.0 * x * x - 2.0 * y * y, 4.0 * (y - x)],
        [0.0, 1.0 - 0.1 * x * x, -50.0 * y * y],
        [0.1 * y * x, p.norm_sqr(), 1.0 - 0.75 * (y + x)],
    ])
}

pub fn ex2_rhs() -> Vec<Complex64> {
    vec![c(0.0), c(0.5), c(0.5)]
}

/// `(Re z₁, Im z₁, z₂)` written through `z₁` and `z̄₁`, so it stays meaningful off the real slice.
fn lift(z: &[Complex64]) -> [Complex64; 3] {
    let (z1, z1c) = (z[0], z[0].conj());
    [(z1 + z1c) / 2.0, (z1 - z1c) / (2.0 * I), z[1]]
}

/// `g(z, p) = A(p)·(Re z₁, Im z₁, z₂) − b`.
pub fn ex2_residual(z: &[Complex64], p: Complex64) -> Vec<Complex64> {
    let w = lift(z);
    let aw = ex2_matrix(p).matvec(&w).expect("3×3 times 3");
    aw.iter().zip(ex2_rhs()).map(|(a, b)| a - b).collect()
}

/// The four Wirtinger partials of the constraint at `(z, p)`.
pub fn ex2_partials(z: &[Complex64], p: Complex64) -> WirtingerPartials {
    let pc = p.conj();
    let re = (p + pc) / 2.0;
    let im = (p - pc) / (2.0 * I);
    let half = c(0.5);
    let inv2i = 1.0 / (2.0 * I);
    let one = c(1.0);
    let zero = c(0.0);

    let a11 = one - im * im;
    let a12 = 5.0 * re * re - 2.0 * im * im;
    let a13 = 4.0 * (im - re);
    let a22 = one - 0.1 * re * re;
    let a23 = -50.0 * im * im;
    let a31 = 0.1 * (im * re);
    let a32 = p * pc;
    let a33 = one - 0.75 * (im + re);

    let d1g = CMatrix::from_rows(&[
        [half * a11 + inv2i * a12, a13],
        [inv2i * a22, a23],
        [half * a31 + inv2i * a32, a33],
    ]);
    let d1cg = CMatrix::from_rows(&[
        [half * a11 - inv2i * a12, zero],
        [-inv2i * a22, zero],
        [half * a31 - inv2i * a32, zero],
    ]);

    let [w1, w2, z2] = lift(z);
    let d2g = CMatrix::column(&[
        -(2.0 * inv2i) * im * w1 + (5.0 * re - 4.0 * inv2i * im) * w2 + 4.0 * (inv2i - half) * z2,
        -0.1 * re * w2 - 100.0 * inv2i * im * z2,
        0.1 * ((p - pc) / (4.0 * I) + (p + pc) / (4.0 * I)) * w1 + pc * w2 - 0.75 * (half + inv2i) * z2,
    ]);
    let d2cg = CMatrix::column(&[
        (2.0 * inv2i) * im * w1 + (5.0 * re + 4.0 * inv2i * im) * w2 + 4.0 * (-inv2i - half) * z2,
        -0.1 * re * w2 + 100.0 * inv2i * im * z2,
        0.1 * ((p - pc) / (4.0 * I) - (p + pc) / (4.0 * I)) * w1 + p * w2 - 0.75 * (half - inv2i) * z2,
    ]);

    WirtingerPartials { d1g, d1cg, d2g, d2cg }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Example2;

impl Example2 {
    /// 1-norm condition estimate of `A(p)`; infinite when singular.
    pub fn condition(p: Complex64) -> f64 {
        Lu::factor(&ex2_matrix(p)).map_or(f64::INFINITY, |lu| lu.condition_estimate())
    }
}

impl ConstraintProblem for Example2 {
    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn constraint_dim(&self) -> usize {
        3
    }

    fn tangent_kind(&self) -> TangentSpaceKind {
        TangentSpaceKind::ComplexHilbert
    }

    fn solve_state(&self, p: &[Complex64]) -> Result<Vec<Complex64>, Error> {
        if p.len() != 1 {
            return Err(Error::DimensionMismatch { what: "ex2 parameter", expected: 1, got: p.len() });
        }
        let lu = Lu::factor(&ex2_matrix(p[0]))?;
        let v = lu.solve_vec(&ex2_rhs());
        Ok(vec![Complex64::new(v[0].re, v[1].re), c(v[2].re)])
    }

    fn residual(&self, x: &[Complex64], p: &[Complex64]) -> Vec<Complex64> {
        ex2_residual(x, p[0])
    }

    fn partials(&self, x: &[Complex64], p: &[Complex64]) -> WirtingerPartials {
        ex2_partials(x, p[0])
    }
}

impl CostProblem for Example2 {
    fn value(&self, x: &[Complex64], _p: &[Complex64]) -> f64 {
        x.iter().map(|z| z.norm_sqr()).sum()
    }

    fn gradients(&self, x: &[Complex64], _p: &[Complex64]) -> CostGradients {
        CostGradients {
            g1: x.iter().map(|z| z * 2.0).collect(),
            g2: vec![c(0.0)],
        }
    }
}

impl Problem for Example2 {
    fn name(&self) -> &'static str {
        "ex2"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::{fd_wirtinger_jacobian, FdConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn origin_state() {
        assert_eq!(ex2_matrix(cx(0.0, 0.0)), CMatrix::identity(3));
        let z = Example2.solve_state(&[cx(0.0, 0.0)]).unwrap();
        assert_eq!(z, vec![cx(0.0, 0.5), cx(0.5, 0.0)]);
    }

    #[test]
    fn printed_entry_of_d1g() {
        let p = cx(0.3, -0.2);
        let parts = ex2_partials(&[cx(0.1, 0.2), cx(-0.3, 0.4)], p);
        let expected = (1.0 - 0.1 * p.re * p.re) / (2.0 * I);
        assert!((parts.d1g[(1, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn partials_match_wirtinger_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = FdConfig::default();
        for _ in 0..10 {
            let p = cx(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let z = [
                cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ];
            let parts = ex2_partials(&z, p);
            let (dz, dzc) = fd_wirtinger_jacobian(|zz: &[Complex64]| ex2_residual(zz, p), &z, &cfg).unwrap();
            let (dp, dpc) = fd_wirtinger_jacobian(|pp: &[Complex64]| ex2_residual(&z, pp[0]), &[p], &cfg).unwrap();
            assert!(max_diff(&dz, &parts.d1g) < 1e-6);
            assert!(max_diff(&dzc, &parts.d1cg) < 1e-6);
            assert!(max_diff(&dp, &parts.d2g) < 1e-6);
            assert!(max_diff(&dpc, &parts.d2cg) < 1e-6);
        }
    }

    #[test]
    fn real_matrix_and_real_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = cx(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            assert!(ex2_matrix(p).data().iter().all(|a| a.im == 0.0));
            let v = Lu::factor(&ex2_matrix(p)).unwrap().solve_vec(&ex2_rhs());
            assert!(v.iter().all(|x| x.im.abs() <= 1e-12));
            let z = Example2.solve_state(&[p]).unwrap();
            assert!(ex2_residual(&z, p).iter().all(|r| r.norm() <= 1e-10));
        }
    }

    #[test]
    fn state_derivative_is_not_conjugate_symmetric() {
        let p = cx(0.2, 0.1);
        let z = Example2.solve_state(&[p]).unwrap();
        let parts = ex2_partials(&z, p);
        assert!(max_diff(&parts.d1g, &parts.d1cg.conj()) > 0.1);
    }

    #[test]
    fn condition_is_finite_on_domain() {
        assert!(Example2::condition(cx(0.4, 0.3)) < 1e8);
    }
}
