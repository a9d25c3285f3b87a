//! Minimal dense linear algebra: row-major matrices, Cholesky factorization,
//! triangular solves, a cyclic-Jacobi symmetric eigensolver, and the
//! symmetric-definite generalized eigenproblem solved by Cholesky congruence.
//!
//! Everything here is plain `f64` over `Vec<f64>`; no BLAS/LAPACK. The kernels
//! are naive O(n^3) and are meant for feature dimensions up to ~1024.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance on the off-diagonal Frobenius norm at which the
/// Jacobi sweep is declared converged.
pub const DEFAULT_EIG_TOL: f64 = 1e-12;

/// Hard cap on Jacobi sweeps before reporting `NoConvergence`.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense real matrix, row-major storage: `data[r * cols + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Wire form of [`Matrix`]; deserialization re-checks the length invariant.
#[derive(Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = String;
    fn try_from(repr: MatrixRepr) -> std::result::Result<Matrix, String> {
        Matrix::new(repr.rows, repr.cols, repr.data)
            .map_err(|e| format!("invalid matrix payload: {}", e))
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Matrix {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    /// Builds a D x N matrix from N column vectors of length D.
    pub fn from_columns(cols: &[Vec<f64>]) -> Matrix {
        let n = cols.len();
        let d = cols.first().map_or(0, |c| c.len());
        let mut m = Matrix::zeros(d, n);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), d, "ragged columns");
            for i in 0..d {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Copy of the first `d` columns.
    pub fn leading_columns(&self, d: usize) -> Matrix {
        assert!(d <= self.cols);
        let mut out = Matrix::zeros(self.rows, d);
        for i in 0..self.rows {
            for j in 0..d {
                out[(i, j)] = self[(i, j)];
            }
        }
        out
    }

    /// Copy of the first `r` rows (contiguous in row-major storage).
    pub fn leading_rows(&self, r: usize) -> Matrix {
        assert!(r <= self.rows);
        Matrix {
            rows: r,
            cols: self.cols,
            data: self.data[..r * self.cols].to_vec(),
        }
    }

    /// Copy of the last `d` columns (used by the top-vs-bottom spectrum checks).
    pub fn trailing_columns(&self, d: usize) -> Matrix {
        assert!(d <= self.cols);
        let mut out = Matrix::zeros(self.rows, d);
        for i in 0..self.rows {
            for j in 0..d {
                out[(i, j)] = self[(i, self.cols - d + j)];
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: (self.cols, other.rows),
                got: (other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, &a_ik) in self.row(i).iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b_kj) in o_row.iter_mut().zip(b_row) {
                    *o += a_ik * b_kj;
                }
            }
        }
        Ok(out)
    }

    /// `scale * self * self^T`, exploiting symmetry of the result.
    pub fn gram_scaled(&self, scale: f64) -> Matrix {
        let d = self.rows;
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                let ri = self.row(i);
                let rj = self.row(j);
                for k in 0..self.cols {
                    acc += ri[k] * rj[k];
                }
                let v = scale * acc;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Adds `s` to every diagonal entry.
    pub fn add_diag(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += s;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(M + M^T) / 2`; absorbs floating-point asymmetry before decompositions.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        out
    }

    /// Subtracts `v` from every column.
    pub fn sub_col_vector(&self, v: &[f64]) -> Result<Matrix> {
        if v.len() != self.rows {
            return Err(Error::LengthMismatch {
                left: v.len(),
                right: self.rows,
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] -= v[i];
            }
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues sorted non-increasing, with the matching eigenvectors as
/// columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigPairs {
    /// Truncates to the leading `d` pairs.
    pub fn truncated(&self, d: usize) -> EigPairs {
        EigPairs {
            values: self.values[..d].to_vec(),
            vectors: self.vectors.leading_columns(d),
        }
    }
}

/// Side selector for [`tri_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriSide {
    /// Solve `L * X = RHS` by forward substitution.
    Lower,
    /// Solve `L^T * X = RHS` by back substitution.
    LowerTransposed,
}

/// Cholesky factorization `B = L * L^T` of a symmetric positive-definite
/// matrix. The input is symmetrized first; a pivot <= 0 reports
/// `NotPositiveDefinite`.
pub fn cholesky(b: &Matrix) -> Result<Matrix> {
    if !b.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (b.rows(), b.rows()),
            got: b.shape(),
        });
    }
    let n = b.rows();
    let b = b.symmetrized();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = b[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut acc = b[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Ok(l)
}

/// Solves `L * X = RHS` or `L^T * X = RHS` for a lower-triangular `L`.
pub fn tri_solve(l: &Matrix, rhs: &Matrix, side: TriSide) -> Result<Matrix> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (l.rows(), l.rows()),
            got: l.shape(),
        });
    }
    if rhs.rows() != l.rows() {
        return Err(Error::DimensionMismatch {
            expected: (l.rows(), rhs.cols()),
            got: rhs.shape(),
        });
    }
    let n = l.rows();
    for i in 0..n {
        if l[(i, i)].abs() < 1e-300 {
            return Err(Error::SingularDiagonal { index: i });
        }
    }
    let mut x = rhs.clone();
    match side {
        TriSide::Lower => {
            for i in 0..n {
                for k in 0..i {
                    let lik = l[(i, k)];
                    if lik == 0.0 {
                        continue;
                    }
                    for j in 0..x.cols() {
                        let v = x[(k, j)];
                        x[(i, j)] -= lik * v;
                    }
                }
                let d = l[(i, i)];
                for j in 0..x.cols() {
                    x[(i, j)] /= d;
                }
            }
        }
        TriSide::LowerTransposed => {
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    let lki = l[(k, i)];
                    if lki == 0.0 {
                        continue;
                    }
                    for j in 0..x.cols() {
                        let v = x[(k, j)];
                        x[(i, j)] -= lki * v;
                    }
                }
                let d = l[(i, i)];
                for j in 0..x.cols() {
                    x[(i, j)] /= d;
                }
            }
        }
    }
    Ok(x)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns pairs sorted by descending eigenvalue. Each eigenvector is
/// sign-normalized so that its largest-magnitude component (lowest index on
/// ties) is positive, which makes the output reproducible across runs.
pub fn jacobi_eig_sym(s: &Matrix, tol: f64) -> Result<EigPairs> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (s.rows(), s.rows()),
            got: s.shape(),
        });
    }
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidHyperParam {
            name: "tol",
            value: tol,
        });
    }
    let n = s.rows();
    let mut a = s.symmetrized();
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();
    let threshold = tol * norm;

    if norm > 0.0 {
        let mut converged = false;
        for _sweep in 0..MAX_JACOBI_SWEEPS {
            if off_diagonal_norm(&a) <= threshold {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;

                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    a[(p, p)] = c * c * app - 2.0 * sn * c * apq + sn * sn * aqq;
                    a[(q, q)] = sn * sn * app + 2.0 * sn * c * apq + c * c * aqq;
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - sn * akq;
                        a[(p, k)] = a[(k, p)];
                        a[(k, q)] = sn * akp + c * akq;
                        a[(q, k)] = a[(k, q)];
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - sn * vkq;
                        v[(k, q)] = sn * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged && off_diagonal_norm(&a) > threshold {
            return Err(Error::NoConvergence {
                sweeps: MAX_JACOBI_SWEEPS,
            });
        }
    }

    let values: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: ties keep the rotation order, so repeated runs agree.
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());

    let mut sorted_vals = Vec::with_capacity(n);
    let mut sorted_vecs = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        sorted_vals.push(values[old_j]);
        for i in 0..n {
            sorted_vecs[(i, new_j)] = v[(i, old_j)];
        }
    }
    fix_column_signs(&mut sorted_vecs);
    Ok(EigPairs {
        values: sorted_vals,
        vectors: sorted_vecs,
    })
}

/// Generalized symmetric-definite eigenproblem `A p = eta B p`.
///
/// Solved via Cholesky congruence: `B = L L^T`, `C = L^-1 A L^-T`, a standard
/// Jacobi decomposition of `C`, and the back-map `p = L^-T q`. The returned
/// eigenvector columns are B-orthonormal.
pub fn gen_eig_sym_def(a: &Matrix, b: &Matrix) -> Result<EigPairs> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: b.shape(),
            got: a.shape(),
        });
    }
    let l = cholesky(b)?;
    let w = tri_solve(&l, &a.symmetrized(), TriSide::Lower)?;
    let c = tri_solve(&l, &w.transpose(), TriSide::Lower)?.transpose();
    let pairs = jacobi_eig_sym(&c, DEFAULT_EIG_TOL)?;
    let mut p = tri_solve(&l, &pairs.vectors, TriSide::LowerTransposed)?;
    fix_column_signs(&mut p);
    Ok(EigPairs {
        values: pairs.values,
        vectors: p,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Flips each column so its largest-magnitude component (lowest index on
/// ties) is positive.
pub(crate) fn fix_column_signs(m: &mut Matrix) {
    for j in 0..m.cols() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..m.rows() {
            let mag = m[(i, j)].abs();
            if mag > best_abs {
                best_abs = mag;
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}
