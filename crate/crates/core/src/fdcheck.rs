//! Central finite differences, used as the independent oracle for every
//! gradient the engine produces.
//!
//! Complex coordinates are perturbed along their real and imaginary axes
//! separately; Wirtinger derivatives follow from
//! `∂/∂z = ½(∂/∂x − i∂/∂y)` and `∂/∂z̄ = ½(∂/∂x + i∂/∂y)`.

use num_complex::Complex64;

use crate::cxla::CMatrix;
use crate::wirtinger::TangentSpaceKind;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub step: f64,
    pub scheme: FdScheme,
    pub relative_tol: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            scheme: FdScheme::Central,
            relative_tol: 1e-5,
        }
    }
}

impl FdConfig {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), Error> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, Error> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation { what })
    }
}

/// Central-difference gradient of a real-valued `evalf` in realified
/// coordinates: `m` real parts for real spaces, `[∂/∂Re; ∂/∂Im]` (length
/// `2m`) for complex ones. Matches [`crate::wirtinger::to_real_coords`]
/// applied to the engine gradient.
pub fn fd_total_gradient(
    mut evalf: impl FnMut(&[Complex64]) -> Result<f64, Error>,
    p: &[Complex64],
    kind: TangentSpaceKind,
    cfg: &FdConfig,
) -> Result<Vec<f64>, Error> {
    cfg.check()?;
    let h = cfg.step;
    let m = p.len();
    let directions: Vec<Complex64> = match kind {
        TangentSpaceKind::RealHilbert => vec![Complex64::new(1.0, 0.0)],
        TangentSpaceKind::ComplexHilbert => vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
    };
    let mut out = Vec::with_capacity(directions.len() * m);
    let mut probe = p.to_vec();
    for dir in directions {
        for k in 0..m {
            probe[k] = p[k] + h * dir;
            let fp = finite(evalf(&probe)?, "fd_total_gradient")?;
            probe[k] = p[k] - h * dir;
            let fm = finite(evalf(&probe)?, "fd_total_gradient")?;
            probe[k] = p[k];
            out.push((fp - fm) / (2.0 * h));
        }
    }
    Ok(out)
}

/// Same as [`fd_total_gradient`] over plain real coordinates.
pub fn fd_real_gradient(
    mut evalf: impl FnMut(&[f64]) -> Result<f64, Error>,
    x: &[f64],
    cfg: &FdConfig,
) -> Result<Vec<f64>, Error> {
    cfg.check()?;
    let h = cfg.step;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let fp = finite(evalf(&probe)?, "fd_real_gradient")?;
        probe[k] = x[k] - h;
        let fm = finite(evalf(&probe)?, "fd_real_gradient")?;
        probe[k] = x[k];
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

fn check_vec(v: &[Complex64]) -> Result<(), Error> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteEvaluation {
            what: "fd_wirtinger_jacobian",
        })
    }
}

/// Wirtinger Jacobians `(∂g/∂z, ∂g/∂z̄)` of a vector map at `at`.
pub fn fd_wirtinger_jacobian(
    mut g: impl FnMut(&[Complex64]) -> Vec<Complex64>,
    at: &[Complex64],
    cfg: &FdConfig,
) -> Result<(CMatrix, CMatrix), Error> {
    cfg.check()?;
    let h = cfg.step;
    let base = g(at);
    check_vec(&base)?;
    let rows = base.len();
    let mut dz = CMatrix::zeros(rows, at.len());
    let mut dzbar = CMatrix::zeros(rows, at.len());
    let mut probe = at.to_vec();
    let i = Complex64::new(0.0, 1.0);
    for k in 0..at.len() {
        let mut diff = |dir: Complex64| -> Result<Vec<Complex64>, Error> {
            probe[k] = at[k] + h * dir;
            let fp = g(&probe);
            probe[k] = at[k] - h * dir;
            let fm = g(&probe);
            probe[k] = at[k];
            check_vec(&fp)?;
            check_vec(&fm)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let dx = diff(Complex64::new(1.0, 0.0))?;
        let dy = diff(i)?;
        for r in 0..rows {
            dz[(r, k)] = 0.5 * (dx[r] - i * dy[r]);
            dzbar[(r, k)] = 0.5 * (dx[r] + i * dy[r]);
        }
    }
    Ok((dz, dzbar))
}

/// Jacobian of a complex-valued map of real coordinates.
pub fn fd_real_jacobian(
    mut g: impl FnMut(&[f64]) -> Vec<Complex64>,
    at: &[f64],
    cfg: &FdConfig,
) -> Result<CMatrix, Error> {
    cfg.check()?;
    let h = cfg.step;
    let rows = g(at).len();
    let mut jac = CMatrix::zeros(rows, at.len());
    let mut probe = at.to_vec();
    for k in 0..at.len() {
        probe[k] = at[k] + h;
        let fp = g(&probe);
        probe[k] = at[k] - h;
        let fm = g(&probe);
        probe[k] = at[k];
        check_vec(&fp)?;
        check_vec(&fm)?;
        for r in 0..rows {
            jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `‖a − b‖₂ / max(‖b‖₂, floor)`; the floor keeps near-zero gradients from
/// blowing up the ratio.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(floor);
    diff / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_in_real_part() {
        let g = fd_total_gradient(
            |p| Ok(p[0].re * p[0].re),
            &[c(3.0, 0.0)],
            TangentSpaceKind::RealHilbert,
            &FdConfig::default(),
        )
        .unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn modulus_squared_over_complex_parameter() {
        let g = fd_total_gradient(
            |p| Ok(p[0].norm_sqr()),
            &[c(1.0, 2.0)],
            TangentSpaceKind::ComplexHilbert,
            &FdConfig::default(),
        )
        .unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn identity_and_conjugate_jacobians() {
        let cfg = FdConfig::default();
        let at = [c(0.3, -0.4), c(1.0, 2.0)];
        let (dz, dzbar) = fd_wirtinger_jacobian(|z| z.to_vec(), &at, &cfg).unwrap();
        assert!(dz.sub(&CMatrix::identity(2)).unwrap().max_abs() < 1e-9);
        assert!(dzbar.max_abs() < 1e-9);
        let (dz, dzbar) = fd_wirtinger_jacobian(|z| z.iter().map(|w| w.conj()).collect(), &at, &cfg).unwrap();
        assert!(dz.max_abs() < 1e-9);
        assert!(dzbar.sub(&CMatrix::identity(2)).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn exact_on_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = |p: &[Complex64]| {
                let (x, y) = (p[0].re, p[0].im);
                a[0] * x * x + a[1] * x * y + a[2] * y * y + a[3] * x + a[4] * y + a[5]
            };
            let p = [c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
            let g = fd_total_gradient(|q| Ok(f(q)), &p, TangentSpaceKind::ComplexHilbert, &FdConfig::default())
                .unwrap();
            let (x, y) = (p[0].re, p[0].im);
            assert!((g[0] - (2.0 * a[0] * x + a[1] * y + a[3])).abs() < 1e-9);
            assert!((g[1] - (a[1] * x + 2.0 * a[2] * y + a[4])).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_error_is_second_order() {
        // f = exp(x) sin(y); deviations from the exact derivative should drop
        // by ~4x when the step halves.
        let f = |p: &[Complex64]| p[0].re.exp() * p[0].im.sin();
        let p = [c(0.3, 0.7)];
        let exact = [0.3f64.exp() * 0.7f64.sin(), 0.3f64.exp() * 0.7f64.cos()];
        let dev = |h: f64| {
            let g = fd_total_gradient(|q| Ok(f(q)), &p, TangentSpaceKind::ComplexHilbert, &FdConfig::with_step(h))
                .unwrap();
            ((g[0] - exact[0]).powi(2) + (g[1] - exact[1]).powi(2)).sqrt()
        };
        // Larger steps than the default so truncation dominates roundoff.
        let ratio = dev(1e-2) / dev(5e-3);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn halving_default_scale_step_quarters_truncation() {
        // Strong cubic term so truncation (∝ h²) dominates roundoff at h = 1e-5.
        let f = |p: &[Complex64]| 1e4 * p[0].re.powi(3);
        let p = [c(0.5, 0.0)];
        let exact = 3e4 * 0.25;
        let dev = |h: f64| {
            let g = fd_total_gradient(|q| Ok(f(q)), &p, TangentSpaceKind::RealHilbert, &FdConfig::with_step(h))
                .unwrap();
            (g[0] - exact).abs()
        };
        let ratio = dev(1e-5) / dev(5e-6);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let r = fd_total_gradient(
            |_| Ok(f64::NAN),
            &[c(0.0, 0.0)],
            TangentSpaceKind::RealHilbert,
            &FdConfig::default(),
        );
        assert!(matches!(r, Err(Error::NonFiniteEvaluation { .. })));
        let r = fd_wirtinger_jacobian(|_| vec![c(f64::INFINITY, 0.0)], &[c(0.0, 0.0)], &FdConfig::default());
        assert!(matches!(r, Err(Error::NonFiniteEvaluation { .. })));
    }

    #[test]
    fn non_positive_step_rejected() {
        let r = fd_real_gradient(|x| Ok(x[0]), &[1.0], &FdConfig::with_step(0.0));
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }
}
