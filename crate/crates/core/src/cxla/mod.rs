//! Dense complex linear algebra.
//!
//! Row-major storage (`data[i * cols + j]` holds `A[i, j]`), partial-pivoting
//! LU for square systems and Householder QR for least-squares and
//! minimum-norm solves. Everything the adjoint engine needs and nothing more.

mod lu;
mod qr;

pub use lu::{lu_solve, Lu};
pub use qr::{lstsq_solve, minnorm_solve, HouseholderQr};
pub(crate) use qr::{lstsq_with_qr, minnorm_with_qr};

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

/// Relative pivot magnitude below which LU reports a singular matrix.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-13;
/// Relative `|R_kk|` below which QR reports rank deficiency.
pub const RANK_DEFICIENT_RTOL: f64 = 1e-12;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch, expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is singular (pivot {pivot} below relative threshold)")]
    SingularMatrix { pivot: usize },
    #[error("matrix is rank deficient (QR diagonal {column} below relative threshold)")]
    RankDeficient { column: usize },
    #[error("data length mismatch: expected {expected}, got {got}")]
    InvalidData { expected: usize, got: usize },
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::InvalidData {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[Complex64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows in CMatrix::from_rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Real matrix lifted into the complex field.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let lifted: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&lifted)
    }

    /// An `n x 1` matrix holding `v`.
    pub fn column(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Complex64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                expected: (self.cols, rhs.cols),
                got: rhs.shape(),
            });
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch {
                op: "matvec",
                expected: (self.cols, 1),
                got: (v.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn add(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        rhs: &CMatrix,
        op: &'static str,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CMatrix, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                expected: self.shape(),
                got: rhs.shape(),
            });
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced infinity-norm (maximum row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Assembles `[[a, b], [c, d]]`; block shapes must tile.
    pub fn block2x2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> Result<CMatrix, LinalgError> {
        let top = Self::hstack(a, b)?;
        let bottom = Self::hstack(c, d)?;
        Self::vstack(&top, &bottom)
    }

    pub fn hstack(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        if a.rows != b.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "hstack",
                expected: (a.rows, b.cols),
                got: b.shape(),
            });
        }
        Ok(CMatrix::from_fn(a.rows, a.cols + b.cols, |i, j| {
            if j < a.cols {
                a[(i, j)]
            } else {
                b[(i, j - a.cols)]
            }
        }))
    }

    pub fn vstack(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        if a.cols != b.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "vstack",
                expected: (b.rows, a.cols),
                got: b.shape(),
            });
        }
        let mut data = a.data.clone();
        data.extend_from_slice(&b.data);
        Ok(CMatrix {
            rows: a.rows + b.rows,
            cols: a.cols,
            data,
        })
    }

    /// Rows `r0..r1` as a new matrix.
    pub fn row_slice(&self, r0: usize, r1: usize) -> CMatrix {
        CMatrix {
            rows: r1 - r0,
            cols: self.cols,
            data: self.data[r0 * self.cols..r1 * self.cols].to_vec(),
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// `(A)ᴴ`, the conjugate transpose.
pub fn conj_transpose(a: &CMatrix) -> CMatrix {
    a.conj_transpose()
}

/// Standard inner product `Σ a_k conj(b_k)`, conjugate-linear in `b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Estimates `‖A⁻¹‖₁` from solves with `A` and `Aᴴ` (Hager's method,
/// complex variant as in LAPACK `zlacon`).
pub(crate) fn estimate_inverse_norm1(
    n: usize,
    solve: impl Fn(&[Complex64]) -> Vec<Complex64>,
    solve_h: impl Fn(&[Complex64]) -> Vec<Complex64>,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut estimate = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = solve(&x);
        let y_norm: f64 = y.iter().map(|z| z.norm()).sum();
        if y_norm <= estimate {
            break;
        }
        estimate = y_norm;
        let signs: Vec<Complex64> = y
            .iter()
            .map(|&z| if z.norm() > 0.0 { z / z.norm() } else { ONE })
            .collect();
        let z = solve_h(&signs);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.norm()))
            .fold((0, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        let ztx = inner(&x, &z).re;
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![ZERO; n];
        x[j] = ONE;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn conj_transpose_of_i_is_minus_i() {
        let a = CMatrix::from_rows(&[[c(0.0, 1.0)]]);
        assert_eq!(conj_transpose(&a)[(0, 0)], c(0.0, -1.0));
    }

    #[test]
    fn real_symmetric_is_self_adjoint() {
        let a = CMatrix::from_real_rows(&[[1.0, 2.0, 3.0], [2.0, 5.0, -1.0], [3.0, -1.0, 7.0]]);
        assert_eq!(conj_transpose(&a), a);
    }

    #[test]
    fn adjoint_of_product_reverses_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 3, 4);
        let b = random_matrix(&mut rng, 4, 2);
        let lhs = a.matmul(&b).unwrap().conj_transpose();
        let rhs = b.conj_transpose().matmul(&a.conj_transpose()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn block_assembly_layout() {
        let a = CMatrix::from_real_rows(&[[1.0]]);
        let b = CMatrix::from_real_rows(&[[2.0]]);
        let cc = CMatrix::from_real_rows(&[[3.0]]);
        let d = CMatrix::from_real_rows(&[[4.0]]);
        let m = CMatrix::block2x2(&a, &b, &cc, &d).unwrap();
        assert_eq!(m, CMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]));
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(matches!(
            CMatrix::new(2, 2, vec![ZERO; 3]),
            Err(LinalgError::InvalidData { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = CMatrix::zeros(2, 3);
        assert!(a.matmul(&CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn inverse_norm_estimate_is_close_on_small_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 6, 6);
        let lu = Lu::factor(&a).unwrap();
        let inv = lu.solve(&CMatrix::identity(6)).unwrap();
        let exact = inv.norm1();
        let est = lu.inverse_norm1_estimate();
        // Hager's estimate is a lower bound and is usually within a small factor.
        assert!(est <= exact * (1.0 + 1e-12));
        assert!(est >= exact / 3.0, "est {est} exact {exact}");
    }

    proptest::proptest! {
        #[test]
        fn conj_transpose_is_an_involution(data in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 12)) {
            let a = CMatrix::new(3, 4, data.into_iter().map(|(r, i)| c(r, i)).collect()).unwrap();
            proptest::prop_assert_eq!(a.conj_transpose().conj_transpose(), a);
        }
    }
}
