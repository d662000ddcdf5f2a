//! Dense symmetric linear algebra.
//!
//! Everything here is small and dense (d up to a few hundred), stored as
//! contiguous `f64` buffers. Symmetric matrices are row-major; data matrices
//! and bases are column-major so that each sample or basis vector is a
//! contiguous slice.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{check_range, Error, Result};

/// Maximum number of cyclic Jacobi sweeps before giving up on convergence.
const MAX_SWEEPS: usize = 100;
/// Relative off-diagonal Frobenius mass at which Jacobi iteration stops.
const JACOBI_TOL: f64 = 1e-12;
/// Orthonormality tolerance for [`Basis`].
pub const BASIS_TOL: f64 = 1e-10;

/// A dense symmetric `d x d` matrix, stored row-major.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim {
            list.entry(&self.row(i));
        }
        list.finish()
    }
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries, replacing `M` by
    /// `(M + M^T) / 2`.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let mut m = Self { dim, data };
        m.symmetrize();
        Ok(m)
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("rows must form a square matrix".into()));
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(dim, data)
    }

    /// Trusted constructor for buffers that are symmetric and finite by construction.
    pub(crate) fn from_symmetric_unchecked(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_symmetric_unchecked(dim, vec![0.0; dim * dim])
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let d = values.len();
        Self::from_fn(d, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// `v v^T`.
    pub fn outer(v: &[f64]) -> Result<Self> {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_symmetric_unchecked(self.dim, self.data.iter().map(|v| a * v).collect())
    }

    /// `a * self + b * I`.
    pub fn affine_identity(&self, a: f64, b: f64) -> Self {
        let mut out = self.scale(a);
        for i in 0..self.dim {
            out.data[i * self.dim + i] += b;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length mismatch");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self * other * self`, which is symmetric for symmetric arguments.
    pub fn sandwich(&self, other: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        assert_eq!(d, other.dim, "dimension mismatch");
        let tmp = matmul(&self.data, &other.data, d);
        let mut out = SymMatrix::from_symmetric_unchecked(d, matmul(&tmp, &self.data, d));
        out.symmetrize();
        out
    }

    fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (self.data[i * d + j] + self.data[j * d + i]);
                self.data[i * d + j] = v;
                self.data[j * d + i] = v;
            }
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * d..(k + 1) * d];
            let orow = &mut out[i * d..(i + 1) * d];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        SymMatrix::from_symmetric_unchecked(
            self.dim,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        )
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        SymMatrix::from_symmetric_unchecked(
            self.dim,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        )
    }
}

impl Mul<&SymMatrix> for f64 {
    type Output = SymMatrix;
    fn mul(self, rhs: &SymMatrix) -> SymMatrix {
        rhs.scale(self)
    }
}

/// A `d x n` data matrix whose columns are the samples `x_1..x_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    dim: usize,
    count: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    /// Builds from column-major entries (`data[t * dim + i]` is coordinate `i` of sample `t`).
    pub fn from_column_major(dim: usize, count: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || count == 0 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be non-empty, got {dim}x{count}"
            )));
        }
        if data.len() != dim * count {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for {dim}x{count} data, got {}",
                dim * count,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data has non-finite entries".into()));
        }
        Ok(Self { dim, count, data })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidInput("columns have unequal lengths".into()));
        }
        Self::from_column_major(dim, columns.len(), columns.concat())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn column(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// A `d x m` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    dim: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Basis {
    /// Wraps column-major entries, checking `‖A^T A − I‖_∞ ≤ 1e-10`.
    pub fn new(dim: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if rank == 0 || rank > dim {
            return Err(Error::InvalidInput(format!(
                "basis rank {rank} must be in 1..={dim}"
            )));
        }
        if data.len() != dim * rank {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{rank} basis, got {}",
                dim * rank,
                data.len()
            )));
        }
        let b = Self { dim, rank, data };
        let err = b.gram_error();
        if !(err <= BASIS_TOL) {
            return Err(Error::InvalidInput(format!(
                "columns are not orthonormal (‖AᵀA − I‖∞ = {err:e})"
            )));
        }
        Ok(b)
    }

    pub(crate) fn from_orthonormal_unchecked(dim: usize, rank: usize, data: Vec<f64>) -> Self {
        Self { dim, rank, data }
    }

    /// `[e_1 .. e_m]`.
    pub fn standard(dim: usize, rank: usize) -> Result<Self> {
        check_range("rank", rank, 1, dim)?;
        let mut data = vec![0.0; dim * rank];
        for j in 0..rank {
            data[j * dim + j] = 1.0;
        }
        Ok(Self::from_orthonormal_unchecked(dim, rank, data))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `‖A^T A − I‖_∞`.
    pub fn gram_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rank {
            for j in 0..self.rank {
                let dot = dot(self.column(i), self.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// `A^T x`.
    pub fn compress(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length mismatch");
        (0..self.rank).map(|j| dot(self.column(j), x)).collect()
    }

    /// `A z`.
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.rank, "vector length mismatch");
        let mut out = vec![0.0; self.dim];
        for (j, &zj) in z.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += zj * a;
            }
        }
        out
    }

    /// `A A^T`, the orthogonal projector onto the span.
    pub fn projector(&self) -> SymMatrix {
        let d = self.dim;
        let mut p = vec![0.0; d * d];
        for j in 0..self.rank {
            let c = self.column(j);
            for i in 0..d {
                for k in 0..d {
                    p[i * d + k] += c[i] * c[k];
                }
            }
        }
        let mut m = SymMatrix::from_symmetric_unchecked(d, p);
        m.symmetrize();
        m
    }

    /// `A^T S A`, an `m x m` symmetric matrix.
    pub fn compress_matrix(&self, s: &SymMatrix) -> SymMatrix {
        assert_eq!(s.dim(), self.dim, "dimension mismatch");
        let sa: Vec<Vec<f64>> = (0..self.rank).map(|j| s.mul_vec(self.column(j))).collect();
        let m = self.rank;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = dot(self.column(i), &sa[j]);
            }
        }
        let mut c = SymMatrix::from_symmetric_unchecked(m, out);
        c.symmetrize();
        c
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    dim: usize,
    values: Vec<f64>,
    vectors: Vec<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues, signed, in descending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unit eigenvector paired with `values()[i]`.
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// `λ_k − λ_{k+1}` (1-based `k`); zero when `k = d`.
    pub fn eigengap(&self, k: usize) -> Result<f64> {
        check_range("k", k, 1, self.dim)?;
        if k == self.dim {
            return Ok(0.0);
        }
        Ok(self.values[k - 1] - self.values[k])
    }

    /// `Σ w_i v_i v_i^T` over the given `(index, weight)` pairs.
    pub(crate) fn weighted_sum(&self, terms: impl Iterator<Item = (usize, f64)>) -> SymMatrix {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for (i, w) in terms {
            if w == 0.0 {
                continue;
            }
            let v = self.vector(i);
            for r in 0..d {
                let wr = w * v[r];
                for c in 0..d {
                    out[r * d + c] += wr * v[c];
                }
            }
        }
        let mut m = SymMatrix::from_symmetric_unchecked(d, out);
        m.symmetrize();
        m
    }

    /// `Σ f(i, λ_i) v_i v_i^T`, e.g. a matrix square root or inverse.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> SymMatrix {
        self.weighted_sum(self.values.iter().enumerate().map(|(i, &lam)| (i, f(i, lam))))
    }

    /// `max_i |λ_i|`.
    pub fn norm(&self) -> f64 {
        let first = self.values.first().copied().unwrap_or(0.0);
        let last = self.values.last().copied().unwrap_or(0.0);
        first.abs().max(last.abs())
    }

    /// `Σ λ_i v_i v_i^T`.
    pub fn reconstruct(&self) -> SymMatrix {
        self.weighted_sum(self.values.iter().copied().enumerate())
    }
}

/// Full eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(m: &SymMatrix) -> Result<Spectrum> {
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = JACOBI_TOL * frobenius_norm(m);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A <- J^T A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                // V <- V J, eigenvectors live in the columns of V
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep Jacobi column order
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend((0..n).map(|k| v[k * n + i]));
    }
    Ok(Spectrum {
        dim: n,
        values,
        vectors,
    })
}

/// Operator norm `max |λ_i|`.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(m)?.norm())
}

/// Anything with a flat buffer of real entries.
pub trait Entries {
    fn entries(&self) -> &[f64];
}

impl Entries for SymMatrix {
    fn entries(&self) -> &[f64] {
        &self.data
    }
}

impl Entries for DataMatrix {
    fn entries(&self) -> &[f64] {
        &self.data
    }
}

/// `max_{i,j} |M_ij|`.
pub fn inf_norm<M: Entries + ?Sized>(m: &M) -> f64 {
    m.entries().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn frobenius_norm<M: Entries + ?Sized>(m: &M) -> f64 {
    m.entries().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `max_t ‖x_t‖_2`.
pub fn two_inf_norm(x: &DataMatrix) -> f64 {
    x.columns().map(|c| dot(c, c).sqrt()).fold(0.0, f64::max)
}

/// Orthonormal basis for the column span of the `rows x cols` column-major
/// matrix `g`, via Householder QR with the diagonal of `R` made positive.
pub fn orthonormalize(rows: usize, cols: usize, g: &[f64]) -> Result<Basis> {
    if cols == 0 || cols > rows {
        return Err(Error::InvalidInput(format!(
            "cannot orthonormalize {cols} columns in dimension {rows}"
        )));
    }
    if g.len() != rows * cols {
        return Err(Error::InvalidInput(format!(
            "expected {} entries, got {}",
            rows * cols,
            g.len()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut a = g.to_vec();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r_diag = Vec::with_capacity(cols);

    for j in 0..cols {
        let col = &a[j * rows + j..(j + 1) * rows];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = if col[0] >= 0.0 { -norm } else { norm };
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        r_diag.push(alpha);
        if vv > 0.0 {
            for k in j..cols {
                let tail = &mut a[k * rows + j..(k + 1) * rows];
                let f = 2.0 * dot(&v, tail) / vv;
                for (t, vi) in tail.iter_mut().zip(&v) {
                    *t -= f * vi;
                }
            }
        }
        reflectors.push(v);
    }

    let smallest = r_diag.iter().fold(f64::INFINITY, |acc, r| acc.min(r.abs()));
    if !(smallest > 1e-12 * scale) {
        return Err(Error::DegenerateInput(format!(
            "matrix is numerically rank deficient (min |R_jj| = {smallest:e})"
        )));
    }

    let mut q = vec![0.0; rows * cols];
    for j in 0..cols {
        q[j * rows + j] = 1.0;
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        let vv = dot(v, v);
        if vv == 0.0 {
            continue;
        }
        for k in 0..cols {
            let tail = &mut q[k * rows + j..(k + 1) * rows];
            let f = 2.0 * dot(v, tail) / vv;
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= f * vi;
            }
        }
    }
    for (j, r) in r_diag.iter().enumerate() {
        if *r < 0.0 {
            for x in &mut q[j * rows..(j + 1) * rows] {
                *x = -*x;
            }
        }
    }
    Ok(Basis::from_orthonormal_unchecked(rows, cols, q))
}

/// Orthogonal projector onto the leading `k` eigenvectors.
pub fn top_k_projector(s: &Spectrum, k: usize) -> Result<SymMatrix> {
    check_range("k", k, 1, s.dim)?;
    Ok(s.weighted_sum((0..k).map(|i| (i, 1.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymMatrix::from_row_major(d, raw).unwrap()
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(SymMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(DataMatrix::from_columns(&[vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn eig_identity() {
        let s = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn eig_diagonal_gives_permuted_basis() {
        let s = sym_eig(&SymMatrix::diag(&[1.0, 3.0, -2.0]).unwrap()).unwrap();
        assert_eq!(s.values(), &[3.0, 1.0, -2.0]);
        assert_eq!(s.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(s.vector(1), &[1.0, 0.0, 0.0]);
        assert_eq!(s.vector(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn eig_reconstructs_random_matrices() {
        for seed in 0..20 {
            let m = random_sym(7, seed);
            let s = sym_eig(&m).unwrap();
            let scale = inf_norm(&m).max(1.0);
            assert!(s.reconstruct().max_abs_diff(&m) <= 1e-8 * scale);
            assert!(s.values().windows(2).all(|w| w[0] >= w[1]));
            for i in 0..7 {
                for j in 0..7 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(s.vector(i), s.vector(j)) - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn eig_rejects_nan() {
        let m = SymMatrix::from_symmetric_unchecked(1, vec![f64::NAN]);
        assert!(matches!(sym_eig(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn norms_on_small_matrices() {
        assert_eq!(spectral_norm(&SymMatrix::identity(5)).unwrap(), 1.0);
        let swap = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((spectral_norm(&swap).unwrap() - 1.0).abs() < 1e-15);
        let d = SymMatrix::diag(&[1.5, -0.5]).unwrap();
        assert_eq!(spectral_norm(&d).unwrap(), 1.5);

        let m = SymMatrix::from_rows(&[vec![1.0, -3.0], vec![-3.0, 2.0]]).unwrap();
        assert_eq!(inf_norm(&m), 3.0);
        assert_eq!(frobenius_norm(&SymMatrix::identity(4)), 2.0);

        let x = DataMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(two_inf_norm(&x), 2.0);
    }

    #[test]
    fn orthonormalize_examples() {
        // 2 * leading 3x2 block of I
        let b = orthonormalize(3, 2, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(b.as_slice(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

        let b = orthonormalize(2, 1, &[3.0, 4.0]).unwrap();
        assert!((b.column(0)[0] - 0.6).abs() < 1e-15);
        assert!((b.column(0)[1] - 0.8).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g: Vec<f64> = (0..24)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let b = orthonormalize(8, 3, &g).unwrap();
        assert!(b.gram_error() <= 1e-10);
    }

    #[test]
    fn orthonormalize_rejects_rank_deficiency() {
        let g = [1.0, 2.0, 3.0, 2.0, 4.0, 6.0];
        assert!(matches!(
            orthonormalize(3, 2, &g),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            orthonormalize(2, 1, &[0.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn projector_examples() {
        let s = sym_eig(&SymMatrix::diag(&[3.0, 2.0, 1.0]).unwrap()).unwrap();
        let p = top_k_projector(&s, 2).unwrap();
        assert_eq!(p, SymMatrix::diag(&[1.0, 1.0, 0.0]).unwrap());

        let p = top_k_projector(&s, 3).unwrap();
        assert!(p.max_abs_diff(&SymMatrix::identity(3)) < 1e-15);

        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = top_k_projector(&sym_eig(&m).unwrap(), 1).unwrap();
        let want = SymMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(p.max_abs_diff(&want) < 1e-12);

        assert!(top_k_projector(&s, 0).is_err());
        assert!(top_k_projector(&s, 4).is_err());
    }

    #[test]
    fn projector_is_idempotent() {
        let m = random_sym(6, 3);
        let p = top_k_projector(&sym_eig(&m).unwrap(), 4).unwrap();
        assert!(p.sandwich(&SymMatrix::identity(6)).max_abs_diff(&p) < 1e-12);
        let p2 = SymMatrix::from_symmetric_unchecked(6, matmul(&p.data, &p.data, 6));
        assert!(p2.max_abs_diff(&p) < 1e-8);
        assert!((p.trace() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn basis_helpers() {
        let b = Basis::standard(3, 2).unwrap();
        assert_eq!(b.compress(&[1.0, 2.0, 3.0]), vec![1.0, 2.0]);
        assert_eq!(b.lift(&[1.0, 2.0]), vec![1.0, 2.0, 0.0]);
        assert_eq!(b.projector(), SymMatrix::diag(&[1.0, 1.0, 0.0]).unwrap());
        let s = SymMatrix::from_fn(3, |i, j| (i + j) as f64).unwrap();
        let c = b.compress_matrix(&s);
        assert_eq!(c, SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 2.0]]).unwrap());
        assert!(Basis::new(2, 1, vec![1.0, 1.0]).is_err());
    }
}
