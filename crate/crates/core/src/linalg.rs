//! Dense symmetric kernels sized for covariance descriptors.
//!
//! Everything here works on small dense matrices (9×9 in the tracking
//! pipeline). The symmetric eigensolver is cyclic Jacobi; the generalized
//! problem `a·v = λ·b·v` is reduced to a standard one by Cholesky whitening
//! of `b`.

use std::fmt;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm, relative to the input norm, at which the
/// Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length must match column count");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

/// Symmetric matrix stored as its packed lower triangle, so symmetry holds
/// by construction.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    lower: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "symmetric matrix dimension must be at least 1");
        Self {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from a generator that is only queried for `j <= i`.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from full rows; the input must be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dense = Matrix::from_rows(rows)?;
        if dense.rows() != dense.cols() {
            return Err(Error::DimensionMismatch {
                expected: dense.rows(),
                actual: dense.cols(),
            });
        }
        for i in 0..dense.rows() {
            for j in 0..i {
                if dense.get(i, j) != dense.get(j, i) {
                    return Err(Error::InvalidParams(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_lower_fn(dense.rows(), |i, j| dense.get(i, j)))
    }

    /// Takes the lower triangle of a square dense matrix.
    pub fn from_lower_of(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "matrix must be square");
        Self::from_lower_fn(m.rows(), |i, j| m.get(i, j))
    }

    /// Symmetric part `(m + mᵀ) / 2` of a square dense matrix.
    pub fn symmetrize(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "matrix must be square");
        Self::from_lower_fn(m.rows(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lower[packed_index(i, j)] = v;
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            lower: self.lower.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_diagonal(&mut self, eps: f64) {
        for i in 0..self.dim {
            let v = self.get(i, i);
            self.set(i, i, v + eps);
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Congruence transform `mᵀ·self·m`.
    pub fn congruence(&self, m: &Matrix) -> Result<SymMatrix> {
        let prod = m.transpose().matmul(&self.to_dense())?.matmul(m)?;
        Ok(SymMatrix::symmetrize(&prod))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect();
        f.debug_struct("SymMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Lower Cholesky factor `L` with `a = L·Lᵀ`.
///
/// Fails with [`Error::NotPositiveDefinite`] as soon as a pivot is not
/// strictly positive.
pub fn cholesky(a: &SymMatrix) -> Result<Matrix> {
    let n = a.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            let ljk = l.get(j, k);
            pivot -= ljk * ljk;
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { row: j, pivot });
        }
        let ljj = pivot.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Solves `l·x = b` in place for lower-triangular `l`.
fn forward_substitute(l: &Matrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * b[k];
        }
        b[i] = s / l.get(i, i);
    }
}

/// Solves `lᵀ·x = b` in place for lower-triangular `l`.
fn back_substitute_transposed(l: &Matrix, b: &mut [f64]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * b[k];
        }
        b[i] = s / l.get(i, i);
    }
}

/// A symmetric matrix that passed a Cholesky check; the factor is kept so
/// repeated generalized eigenproblems against it skip refactorization.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    matrix: SymMatrix,
    factor: Matrix,
}

impl SpdMatrix {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        let factor = cholesky(&matrix)?;
        Ok(Self { matrix, factor })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn cholesky_factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `L⁻¹·a·L⁻ᵀ` for this matrix's factor `L`.
    pub fn whiten(&self, a: &SymMatrix) -> Result<SymMatrix> {
        let n = self.dim();
        if a.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: a.dim(),
            });
        }
        // y = L⁻¹·a, column by column
        let mut y = Matrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = a.get(i, j);
            }
            forward_substitute(&self.factor, &mut col);
            for (i, &c) in col.iter().enumerate() {
                y.set(i, j, c);
            }
        }
        // L⁻¹·a·L⁻ᵀ = L⁻¹·yᵀ since a is symmetric
        let mut m = Matrix::zeros(n, n);
        for j in 0..n {
            col.copy_from_slice(y.row(j));
            forward_substitute(&self.factor, &mut col);
            for (i, &c) in col.iter().enumerate() {
                m.set(i, j, c);
            }
        }
        Ok(SymMatrix::symmetrize(&m))
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eigen(a: &SymMatrix) -> SymEigen {
    let n = a.dim();
    let mut m = a.to_dense();
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_TOLERANCE * a.norm_frobenius();

    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m.get(i, j) * m.get(i, j);
                    }
                }
            }
            s.sqrt()
        };
        if off <= threshold {
            break;
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let values = order.iter().map(|&k| m.get(k, k)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    SymEigen {
        values,
        vectors,
        sweeps,
    }
}

/// `m ← Jᵀ·m·J`, `v ← v·J` for the plane rotation through (p, q).
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m.get(k, p);
        let mkq = m.get(k, q);
        m.set(k, p, c * mkp - s * mkq);
        m.set(k, q, s * mkp + c * mkq);
    }
    for k in 0..n {
        let mpk = m.get(p, k);
        let mqk = m.get(q, k);
        m.set(p, k, c * mpk - s * mqk);
        m.set(q, k, s * mpk + c * mqk);
    }
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Generalized eigenvalues of `a·v = λ·b·v`, descending.
pub fn generalized_eigenvalues(a: &SymMatrix, b: &SymMatrix) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    let b = SpdMatrix::new(b.clone())?;
    generalized_eigenvalues_spd(a, &b)
}

/// As [`generalized_eigenvalues`], reusing the stored factor of `b`.
pub fn generalized_eigenvalues_spd(a: &SymMatrix, b: &SpdMatrix) -> Result<Vec<f64>> {
    Ok(sym_eigen(&b.whiten(a)?).values)
}

/// Generalized eigenpairs; the returned vectors are `b`-orthonormal.
pub fn generalized_eigen(a: &SymMatrix, b: &SymMatrix) -> Result<SymEigen> {
    check_dims(a, b)?;
    let b = SpdMatrix::new(b.clone())?;
    let mut eig = sym_eigen(&b.whiten(a)?);
    let n = a.dim();
    let mut col = vec![0.0; n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = eig.vectors.get(i, j);
        }
        back_substitute_transposed(b.cholesky_factor(), &mut col);
        for (i, &c) in col.iter().enumerate() {
            eig.vectors.set(i, j, c);
        }
    }
    Ok(eig)
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}
