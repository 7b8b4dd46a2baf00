//! A linear constraint `A(p)z = b` with a real parameter `p ∈ ℝ²` and cost `|z|²`.

use num_complex::Complex64;

use crate::adjoint::{CostGradients, WirtingerPartials};
use crate::cxla::{lu_solve, CMatrix};
use crate::wirtinger::TangentSpaceKind;
use crate::Error;

use super::{ConstraintProblem, CostProblem, Problem};

/// The parameter box on which `A(p)` stays invertible.
pub const EX1_DOMAIN: [f64; 2] = [-0.5, 0.5];

pub fn ex1_matrix(p: [f64; 2]) -> CMatrix {
    ex1_matrix_holo([Complex64::from(p[0]), Complex64::from(p[1])])
}

/// The same polynomial entries evaluated at complex `p`; `ex1_matrix` is its
/// restriction to the real plane.
pub fn ex1_matrix_holo(p: [Complex64; 2]) -> CMatrix {
    let [p1, p2] = p;
    let one = Complex64::new(1.0, 0.0);
    CMatrix::from_rows(&[
        [one - p2 * p2, 5.0 * p1 * p1 - 2.0 * p2 * p2, 4.0 * (p2 - p1)],
        [Complex64::new(0.0, 0.0), one - 0.1 * p1 * p1, -50.0 * p2 * p2],
        [0.1 * p1 * p2, p2 * p2 + p1 * p1, one - 0.75 * (p1 + p2)],
    ])
}

pub fn ex1_rhs() -> Vec<Complex64> {
    vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, -0.5),
    ]
}

/// `∂(A(p)z)/∂p`, a 3×2 matrix.
pub fn ex1_daz_dp(p: [f64; 2], z: &[Complex64]) -> CMatrix {
    let [p1, p2] = p;
    let (z1, z2, z3) = (z[0], z[1], z[2]);
    CMatrix::from_rows(&[
        [10.0 * p1 * z2 - 4.0 * z3, -2.0 * p2 * z1 - 4.0 * p2 * z2 + 4.0 * z3],
        [-0.2 * p1 * z2, -100.0 * p2 * z3],
        [
            0.1 * p2 * z1 + 2.0 * p1 * z2 - 0.75 * z3,
            0.1 * p1 * z1 + 2.0 * p2 * z2 - 0.75 * z3,
        ],
    ])
}

fn real_pair(p: &[Complex64]) -> [f64; 2] {
    [p[0].re, p[1].re]
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Example1;

impl ConstraintProblem for Example1 {
    fn state_dim(&self) -> usize {
        3
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn constraint_dim(&self) -> usize {
        3
    }

    fn tangent_kind(&self) -> TangentSpaceKind {
        TangentSpaceKind::RealHilbert
    }

    fn solve_state(&self, p: &[Complex64]) -> Result<Vec<Complex64>, Error> {
        check_len(p)?;
        let z = lu_solve(&ex1_matrix(real_pair(p)), &CMatrix::column(&ex1_rhs()))?;
        Ok(z.into_data())
    }

    fn residual(&self, x: &[Complex64], p: &[Complex64]) -> Vec<Complex64> {
        let az = ex1_matrix(real_pair(p)).matvec(x).expect("state has length 3");
        az.iter().zip(ex1_rhs()).map(|(a, b)| a - b).collect()
    }

    fn partials(&self, x: &[Complex64], p: &[Complex64]) -> WirtingerPartials {
        WirtingerPartials {
            d1g: ex1_matrix(real_pair(p)),
            d1cg: CMatrix::zeros(3, 3),
            d2g: ex1_daz_dp(real_pair(p), x),
            d2cg: CMatrix::zeros(3, 2),
        }
    }

    fn linear_form(&self, x: &[Complex64], p: &[Complex64]) -> Option<(CMatrix, CMatrix)> {
        let p = real_pair(p);
        Some((ex1_matrix(p), ex1_daz_dp(p, x)))
    }
}

impl CostProblem for Example1 {
    fn value(&self, x: &[Complex64], _p: &[Complex64]) -> f64 {
        x.iter().map(|z| z.norm_sqr()).sum()
    }

    fn gradients(&self, x: &[Complex64], _p: &[Complex64]) -> CostGradients {
        CostGradients {
            g1: x.iter().map(|z| z * 2.0).collect(),
            g2: vec![Complex64::new(0.0, 0.0); 2],
        }
    }
}

impl Problem for Example1 {
    fn name(&self) -> &'static str {
        "ex1"
    }
}

fn check_len(p: &[Complex64]) -> Result<(), Error> {
    if p.len() != 2 {
        return Err(Error::DimensionMismatch { what: "ex1 parameter", expected: 2, got: p.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxla::Lu;
    use crate::fdcheck::{fd_real_jacobian, FdConfig};
    use crate::problems::{gradient, objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn origin_gives_identity_and_z_equals_b() {
        assert_eq!(ex1_matrix([0.0, 0.0]), CMatrix::identity(3));
        let z = Example1.solve_state(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(z, ex1_rhs());
    }

    #[test]
    fn corner_entries() {
        let a = ex1_matrix([0.5, 0.5]);
        assert_eq!(a[(0, 2)], c(0.0, 0.0));
        assert_eq!(a[(2, 2)], c(0.25, 0.0));
    }

    #[test]
    fn invertible_across_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = [rng.gen_range(-0.5..=0.5), rng.gen_range(-0.5..=0.5)];
            let lu = Lu::factor(&ex1_matrix(p)).unwrap();
            assert!(lu.condition_estimate() < 1e6);
        }
    }

    #[test]
    fn daz_dp_zero_state() {
        assert!(ex1_daz_dp([0.3, -0.1], &[c(0.0, 0.0); 3]).is_zero());
    }

    #[test]
    fn daz_dp_at_origin() {
        let b = ex1_rhs();
        let d = ex1_daz_dp([0.0, 0.0], &b);
        assert_eq!(d.col(0), vec![b[2] * -4.0, c(0.0, 0.0), b[2] * -0.75]);
    }

    #[test]
    fn daz_dp_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let z: Vec<Complex64> = (0..3).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let fd = fd_real_jacobian(
                |q: &[f64]| ex1_matrix([q[0], q[1]]).matvec(&z).unwrap(),
                &p,
                &FdConfig::default(),
            )
            .unwrap();
            let err = fd.sub(&ex1_daz_dp(p, &z)).unwrap().max_abs();
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn state_satisfies_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = [c(rng.gen_range(-0.5..0.5), 0.0), c(rng.gen_range(-0.5..0.5), 0.0)];
            let z = Example1.solve_state(&p).unwrap();
            let r = Example1.residual(&z, &p);
            assert!(r.iter().all(|v| v.norm() <= 1e-10));
        }
    }

    #[test]
    fn frozen_gradient_value() {
        let p = [c(0.1, 0.0), c(0.1, 0.0)];
        let f = objective(&Example1, &p).unwrap();
        assert!((f - 1.3652740708040154).abs() < 1e-12);
        let g = gradient(&Example1, &p, None).unwrap().grad;
        assert!((g[0].re - 1.15732488).abs() < 1e-7);
        assert!((g[1].re - 13.29615801).abs() < 1e-7);
        assert!(g.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn wrong_parameter_length() {
        assert!(matches!(
            Example1.solve_state(&[c(0.1, 0.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
