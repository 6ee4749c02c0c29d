//! Small dense linear algebra: row-major matrices, Cholesky solves on the
//! normal equations and an SVD-backed Moore-Penrose pseudo-inverse.

use serde::{Deserialize, Serialize};

use crate::scalar::{dot, ensure_finite, Scalar};
use crate::{Error, Result};

/// Relative rank cutoff applied to singular values in [`pseudo_inverse`].
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    /// Builds a matrix from row-major data; rejects NaN/Inf entries.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data length",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        ensure_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "ragged rows",
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[T]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    // Internal constructor for results of arithmetic on finite inputs.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul inner dimension",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// `selfᵀ v`.
    pub fn t_matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if self.rows != v.len() {
            return Err(Error::DimensionMismatch {
                context: "transposed matvec",
                expected: self.rows,
                actual: v.len(),
            });
        }
        let mut out = vec![T::zero(); self.cols];
        for (row, &w) in self.row_iter().zip(v) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o = *o + x * w;
            }
        }
        Ok(out)
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for row in self.row_iter() {
            for a in 0..n {
                let ra = row[a];
                if ra == T::zero() {
                    continue;
                }
                for b in a..n {
                    out.data[a * n + b] = out.data[a * n + b] + ra * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                out.data[a * n + b] = out.data[b * n + a];
            }
        }
        out
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(indices.len(), self.cols, data)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                context: "hstack rows",
                expected: self.rows,
                actual: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self::from_raw(self.rows, cols, data))
    }

    /// Prepends a column of ones.
    pub fn with_intercept_column(&self) -> Self {
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for row in self.row_iter() {
            data.push(T::one());
            data.extend_from_slice(row);
        }
        Self::from_raw(self.rows, cols, data)
    }

    pub fn column_means(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for row in self.row_iter() {
            for (s, &x) in sums.iter_mut().zip(row) {
                *s = *s + x;
            }
        }
        let m = T::lit(self.rows.max(1) as f64);
        sums.into_iter().map(|s| s / m).collect()
    }

    /// Subtracts `means` from every row.
    pub fn centered(&self, means: &[T]) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.cols.max(1)) {
            for (x, &mu) in row.iter_mut().zip(means) {
                *x = *x - mu;
            }
        }
        Self::from_raw(self.rows, self.cols, data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky factorization.
///
/// A pivot is rejected when the remaining diagonal mass of its column falls
/// below a small fraction of the original diagonal, so nearly collinear
/// systems are reported as not positive definite and callers can fall back
/// to the pseudo-inverse.
pub fn cholesky_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky: square matrix",
            expected: n,
            actual: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky: rhs length",
            expected: n,
            actual: b.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("cholesky system"));
    }
    let rel = T::epsilon().sqrt() * T::lit(1e-2);
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let ajj = a.get(j, j);
        let mut d = ajj;
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(ajj > T::zero()) || !(d > rel * ajj) {
            return Err(Error::NotPositiveDefinite {
                column: j,
                pivot: d.to_f64_lossy(),
            });
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    // L z = b
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    // Lᵀ x = z
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Thin singular value decomposition `X = U diag(σ) Vᵀ` for `rows ≥ cols`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// `rows × k`, orthonormal columns (zero columns where σ = 0).
    pub u: DenseMatrix<T>,
    pub singular_values: Vec<T>,
    /// `cols × k`, orthogonal.
    pub v: DenseMatrix<T>,
}

/// One-sided Jacobi (Hestenes) SVD. Transposes internally when the matrix is wide.
pub fn svd<T: Scalar>(x: &DenseMatrix<T>) -> Result<Svd<T>> {
    if x.is_empty() {
        return Err(Error::Empty("svd input"));
    }
    if x.rows() < x.cols() {
        let t = svd(&x.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (m, n) = (x.rows(), x.cols());
    // Column-major working copies.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| x.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence(MAX_JACOBI_SWEEPS));
    }
    let mut sigma = Vec::with_capacity(n);
    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let s = dot(&cols[j], &cols[j]).sqrt();
        sigma.push(s);
        if s > T::zero() {
            for i in 0..m {
                u.set(i, j, cols[j][i] / s);
            }
        }
        for i in 0..n {
            vm.set(i, j, v[j][i]);
        }
    }
    Ok(Svd {
        u,
        singular_values: sigma,
        v: vm,
    })
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Moore-Penrose pseudo-inverse; singular values below `tol · σ_max` are treated as zero.
pub fn pseudo_inverse<T: Scalar>(x: &DenseMatrix<T>, tol: T) -> Result<DenseMatrix<T>> {
    let d = svd(x)?;
    let smax = d
        .singular_values
        .iter()
        .fold(T::zero(), |m, &s| m.max(s));
    let (m, n) = (x.rows(), x.cols());
    let mut out = DenseMatrix::zeros(n, m);
    if smax == T::zero() {
        return Ok(out);
    }
    let cutoff = tol * smax;
    for (j, &s) in d.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let inv = T::one() / s;
        for i in 0..n {
            let vij = d.v.get(i, j) * inv;
            if vij == T::zero() {
                continue;
            }
            for k in 0..m {
                let cur = out.get(i, k);
                out.set(i, k, cur + vij * d.u.get(k, j));
            }
        }
    }
    Ok(out)
}

/// Least-squares solution of `X β ≈ y`.
///
/// Uses the normal equations with Cholesky; when `XᵀX` is singular or too
/// ill-conditioned the minimum-norm solution `X⁺ y` is returned instead.
pub fn solve_least_squares<T: Scalar>(x: &DenseMatrix<T>, y: &[T]) -> Result<Vec<T>> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "least squares rows vs targets",
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Empty("least squares design"));
    }
    ensure_finite(y)?;
    let gram = x.gram();
    let rhs = x.t_matvec(y)?;
    match cholesky_solve(&gram, &rhs) {
        Ok(beta) => Ok(beta),
        Err(Error::NotPositiveDefinite { .. }) => {
            pseudo_inverse(x, T::lit(DEFAULT_PINV_TOL))?.matvec(y)
        }
        Err(e) => Err(e),
    }
}
