use num_complex::Complex64;

use super::{estimate_inverse_norm1, CMatrix, LinalgError, SINGULAR_PIVOT_RTOL, ZERO};

/// LU factorization with partial (row) pivoting, `P·A = L·U`.
///
/// `L` is unit lower triangular and shares storage with `U`. Elimination
/// skips zero multipliers, so banded systems factor in near-linear time.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    /// Row `i` of `P·A` is row `perm[i]` of `A`.
    perm: Vec<usize>,
    norm1: f64,
}

impl Lu {
    pub fn factor(a: &CMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                op: "lu",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let threshold = SINGULAR_PIVOT_RTOL * a.max_abs();
        let norm1 = a.norm1();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot_mag) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            if pivot_mag <= threshold || pivot_mag == 0.0 {
                return Err(LinalgError::SingularMatrix { pivot: k });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                if lu[(i, k)] == ZERO {
                    continue;
                }
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    if u != ZERO {
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A·X = B`.
    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.check_rhs(b)?;
        let mut x = CMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = b.col(j);
            x.set_col(j, &self.solve_vec(&col));
        }
        Ok(x)
    }

    /// Solves `Aᴴ·X = B` with the same factorization.
    pub fn solve_conj_transpose(&self, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.check_rhs(b)?;
        let mut x = CMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = b.col(j);
            x.set_col(j, &self.solve_conj_transpose_vec(&col));
        }
        Ok(x)
    }

    fn check_rhs(&self, b: &CMatrix) -> Result<(), LinalgError> {
        if b.rows() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                op: "lu solve",
                expected: (self.dim(), b.cols()),
                got: b.shape(),
            });
        }
        Ok(())
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(i) {
                s -= self.lu[(i, k)] * yk;
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lu[(i, k)] * y[k];
            }
            y[i] = s / self.lu[(i, i)];
        }
        y
    }

    pub fn solve_conj_transpose_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        // Aᴴ = Uᴴ Lᴴ P, so solve Uᴴ w = b, Lᴴ y = w, then x = Pᵀ y.
        let n = self.dim();
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.lu[(k, i)].conj() * w[k];
            }
            w[i] = s / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in (i + 1)..n {
                s -= self.lu[(k, i)].conj() * w[k];
            }
            w[i] = s;
        }
        let mut x = vec![ZERO; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    pub fn inverse_norm1_estimate(&self) -> f64 {
        estimate_inverse_norm1(
            self.dim(),
            |v| self.solve_vec(v),
            |v| self.solve_conj_transpose_vec(v),
        )
    }

    /// 1-norm condition number estimate `‖A‖₁·est(‖A⁻¹‖₁)`.
    pub fn condition_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }
}

/// Solves the square system `A·X = B` by partially pivoted LU.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "lu_solve",
            expected: (a.rows(), b.cols()),
            got: b.shape(),
        });
    }
    Lu::factor(a)?.solve(b)
}
