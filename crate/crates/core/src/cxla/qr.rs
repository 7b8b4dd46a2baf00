use num_complex::Complex64;

use super::{estimate_inverse_norm1, CMatrix, LinalgError, ONE, RANK_DEFICIENT_RTOL, ZERO};

/// Householder QR of a tall (or square) matrix, `A = Q·R`.
///
/// Reflectors are `H_k = I − 2·v_k·v_kᴴ` with unit `v_k`, so each is
/// Hermitian and unitary.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// Upper triangle holds `R`.
    r: CMatrix,
    reflectors: Vec<Vec<Complex64>>,
}

impl HouseholderQr {
    /// Factors `a` (rows ≥ cols) and checks every `|R_kk|` against
    /// `RANK_DEFICIENT_RTOL · max column norm`.
    pub fn factor(a: &CMatrix) -> Result<Self, LinalgError> {
        let (m, n) = a.shape();
        if m < n {
            return Err(LinalgError::DimensionMismatch {
                op: "qr (needs rows >= cols)",
                expected: (n, n),
                got: (m, n),
            });
        }
        let max_col_norm = (0..n)
            .map(|j| a.col(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let mut r = a.clone();
        let mut reflectors = Vec::with_capacity(n);

        for k in 0..n {
            let x: Vec<Complex64> = (k..m).map(|i| r[(i, k)]).collect();
            let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if xnorm <= RANK_DEFICIENT_RTOL * max_col_norm || xnorm == 0.0 {
                return Err(LinalgError::RankDeficient { column: k });
            }
            let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
            let alpha = -phase * xnorm;
            let mut v = x;
            v[0] -= alpha;
            let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for vi in v.iter_mut() {
                *vi /= vnorm;
            }
            for j in k..n {
                let s: Complex64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * r[(k + t, j)]).sum();
                for (t, vi) in v.iter().enumerate() {
                    r[(k + t, j)] -= 2.0 * s * vi;
                }
            }
            // Clean the annihilated part exactly.
            r[(k, k)] = alpha;
            for i in (k + 1)..m {
                r[(i, k)] = ZERO;
            }
            reflectors.push(v);
        }
        Ok(Self {
            rows: m,
            cols: n,
            r,
            reflectors,
        })
    }

    /// Overwrites `b` with `Qᴴ·b`.
    pub fn apply_qh(&self, b: &mut CMatrix) {
        for (k, v) in self.reflectors.iter().enumerate() {
            self.reflect(k, v, b);
        }
    }

    /// Overwrites `b` with `Q·b`.
    pub fn apply_q(&self, b: &mut CMatrix) {
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            self.reflect(k, v, b);
        }
    }

    fn reflect(&self, k: usize, v: &[Complex64], b: &mut CMatrix) {
        debug_assert_eq!(b.rows(), self.rows);
        for j in 0..b.cols() {
            let s: Complex64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * b[(k + t, j)]).sum();
            if s == ZERO {
                continue;
            }
            for (t, vi) in v.iter().enumerate() {
                b[(k + t, j)] -= 2.0 * s * vi;
            }
        }
    }

    /// Solves `R·X = C` for the leading `cols` rows of `c`.
    fn solve_r(&self, c: &CMatrix) -> CMatrix {
        let n = self.cols;
        let mut x = CMatrix::zeros(n, c.cols());
        for j in 0..c.cols() {
            for i in (0..n).rev() {
                let mut s = c[(i, j)];
                for k in (i + 1)..n {
                    s -= self.r[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / self.r[(i, i)];
            }
        }
        x
    }

    /// Solves `Rᴴ·Y = C` (forward substitution).
    fn solve_rh(&self, c: &CMatrix) -> CMatrix {
        let n = self.cols;
        let mut y = CMatrix::zeros(n, c.cols());
        for j in 0..c.cols() {
            for i in 0..n {
                let mut s = c[(i, j)];
                for k in 0..i {
                    s -= self.r[(k, i)].conj() * y[(k, j)];
                }
                y[(i, j)] = s / self.r[(i, i)].conj();
            }
        }
        y
    }

    /// Estimate of `‖R⁻¹‖₁`.
    pub fn r_inverse_norm1_estimate(&self) -> f64 {
        let col = |v: &[Complex64]| CMatrix::column(v);
        estimate_inverse_norm1(
            self.cols,
            |v| self.solve_r(&col(v)).into_data(),
            |v| self.solve_rh(&col(v)).into_data(),
        )
    }
}

/// Least-squares solve of `A·X ≈ B` for `A` with rows ≥ cols and full
/// column rank. Returns `X` and the residual `max |A·X − B|`.
pub fn lstsq_solve(a: &CMatrix, b: &CMatrix) -> Result<(CMatrix, f64), LinalgError> {
    lstsq_with_qr(a, b).map(|(x, residual, _)| (x, residual))
}

pub(crate) fn lstsq_with_qr(
    a: &CMatrix,
    b: &CMatrix,
) -> Result<(CMatrix, f64, HouseholderQr), LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "lstsq_solve",
            expected: (a.rows(), b.cols()),
            got: b.shape(),
        });
    }
    let qr = HouseholderQr::factor(a)?;
    let mut c = b.clone();
    qr.apply_qh(&mut c);
    let x = qr.solve_r(&c);
    let residual = a.matmul(&x)?.sub(b)?.max_abs();
    Ok((x, residual, qr))
}

/// Minimum-2-norm solution of the consistent system `A·X = B` for `A` with
/// rows ≤ cols and full row rank.
pub fn minnorm_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    minnorm_with_qr(a, b).map(|(x, _)| x)
}

/// Also returns the QR factorization of `Aᴴ`.
pub(crate) fn minnorm_with_qr(a: &CMatrix, b: &CMatrix) -> Result<(CMatrix, HouseholderQr), LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "minnorm_solve",
            expected: (a.rows(), b.cols()),
            got: b.shape(),
        });
    }
    if a.rows() > a.cols() {
        return Err(LinalgError::DimensionMismatch {
            op: "minnorm_solve (needs rows <= cols)",
            expected: (a.rows(), a.rows()),
            got: a.shape(),
        });
    }
    // Aᴴ = Q·R  ⇒  A = Rᴴ·Qᴴ; solve Rᴴ·Y = B and lift X = Q·[Y; 0].
    let qr = HouseholderQr::factor(&a.conj_transpose())?;
    let y = qr.solve_rh(b);
    let mut x = CMatrix::zeros(a.cols(), b.cols());
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            x[(i, j)] = y[(i, j)];
        }
    }
    qr.apply_q(&mut x);
    Ok((x, qr))
}
