//! Sparse linear algebra.
//!
//! [`CsrMatrix`] is the storage format used throughout assembly. Direct
//! factorizations are delegated to `faer` (supernodal LU with COLAMD ordering,
//! supernodal Cholesky with AMD ordering). Conjugate gradients and the
//! matrix-free pressure Schur complement live here.

use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Explicit zeros produced by cancellation are kept so that patterns stay
    /// stable between reassemblies.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let slot = next[r];
            cols[slot] = c;
            vals[slot] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_unstable_by_key(|&k| cols[k]);
            let mut last = usize::MAX;
            for &k in &order {
                if cols[k] == last {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = cols[k];
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    /// Validates raw CSR arrays.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("malformed CSR: {msg}")));
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 {
            return bad("row offsets");
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("row offsets decrease");
        }
        if *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len() {
            return bad("array lengths");
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return bad("column indices unsorted, duplicated or out of range");
            }
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = A^T x` without forming the transpose.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                col_idx[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr: counts, col_idx, values }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha * self + beta * other` over the union of both patterns.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in matrix sum");
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for r in 0..self.nrows {
            let (mut a, ae) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let (mut b, be) = (other.row_ptr[r], other.row_ptr[r + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.col_idx[a] } else { usize::MAX };
                let cb = if b < be { other.col_idx[b] } else { usize::MAX };
                if ca == cb {
                    col_idx.push(ca);
                    values.push(alpha * self.values[a] + beta * other.values[b]);
                    a += 1;
                    b += 1;
                } else if ca < cb {
                    col_idx.push(ca);
                    values.push(alpha * self.values[a]);
                    a += 1;
                } else {
                    col_idx.push(cb);
                    values.push(beta * other.values[b]);
                    b += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }

    /// Extracts the block `rows x cols`; `col_map[c]` gives the new column of
    /// old column `c`, or `None` to drop it.
    pub fn submatrix(&self, rows: &[usize], col_map: &[Option<usize>], new_ncols: usize) -> Self {
        assert_eq!(col_map.len(), self.ncols);
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &r in rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if let Some(c) = col_map[self.col_idx[k]] {
                    col_idx.push(c);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        // the map preserves order for monotone selections; sort otherwise
        let mut out = Self { nrows: rows.len(), ncols: new_ncols, row_ptr, col_idx, values };
        out.sort_rows();
        out
    }

    fn sort_rows(&mut self) {
        for r in 0..self.nrows {
            let range = self.row_ptr[r]..self.row_ptr[r + 1];
            let cols = &self.col_idx[range.clone()];
            if cols.windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            let mut pairs: Vec<(usize, f64)> =
                cols.iter().copied().zip(self.values[range.clone()].iter().copied()).collect();
            pairs.sort_unstable_by_key(|p| p.0);
            for (k, (c, v)) in range.zip(pairs) {
                self.col_idx[k] = c;
                self.values[k] = v;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Checks `|a_ij - a_ji| <= tol * max|a|` entrywise.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.nrows).all(|r| self.row(r).all(|(c, v)| (v - self.get(c, r)).abs() <= tol * scale))
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    /// Reads a MatrixMarket coordinate file written by
    /// [`CsrMatrix::write_matrix_market`].
    pub fn read_matrix_market(text: &str) -> Result<Self> {
        let perr = |detail: String| Error::Parse { what: "MatrixMarket".into(), detail };
        let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| perr("missing size line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| perr(e.to_string())))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(perr(format!("bad size line '{header}'")));
        }
        let mut t = Vec::with_capacity(dims[2]);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(format!("bad entry '{line}'")));
            }
            let r: usize = f[0].parse().map_err(|e: std::num::ParseIntError| perr(e.to_string()))?;
            let c: usize = f[1].parse().map_err(|e: std::num::ParseIntError| perr(e.to_string()))?;
            let v: f64 = f[2].parse().map_err(|e: std::num::ParseFloatError| perr(e.to_string()))?;
            if r == 0 || c == 0 || r > dims[0] || c > dims[1] {
                return Err(perr(format!("index out of range in '{line}'")));
            }
            t.push((r - 1, c - 1, v));
        }
        Ok(Self::from_triplets(dims[0], dims[1], &t))
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        // CSR of A^T is CSC of A
        let t = self.transpose();
        let symbolic = SymbolicSparseColMat::new_checked(self.nrows, self.ncols, t.row_ptr, None, t.col_idx);
        Ok(SparseColMat::new(symbolic, t.values))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Subtracts the arithmetic mean.
pub fn project_mean_zero(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

enum FactorKind {
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Cholesky(faer::sparse::linalg::solvers::Llt<usize, f64>),
}

/// A reusable direct factorization of a square sparse matrix.
pub struct SparseFactorization {
    n: usize,
    kind: FactorKind,
}

impl std::fmt::Debug for SparseFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseFactorization").field("n", &self.n).field("spd", &self.is_spd()).finish()
    }
}

impl SparseFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_spd(&self) -> bool {
        matches!(self.kind, FactorKind::Cholesky(_))
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let rhs = MatMut::from_column_major_slice_mut(b, self.n, 1);
        match &self.kind {
            FactorKind::Lu(lu) => lu.solve_in_place(rhs),
            FactorKind::Cholesky(llt) => llt.solve_in_place(rhs),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

fn check_square(a: &CsrMatrix) -> Result<()> {
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch { expected: a.nrows, got: a.ncols });
    }
    Ok(())
}

/// Rows and columns without any stored nonzero make the matrix structurally
/// singular; report the first such row.
fn check_structure(a: &CsrMatrix) -> Result<()> {
    let mut col_seen = vec![false; a.ncols];
    for r in 0..a.nrows {
        let mut any = false;
        for (c, v) in a.row(r) {
            if v != 0.0 {
                any = true;
                col_seen[c] = true;
            }
        }
        if !any {
            return Err(Error::SingularPivot { row: r });
        }
    }
    if let Some(c) = col_seen.iter().position(|s| !s) {
        return Err(Error::SingularPivot { row: c });
    }
    Ok(())
}

/// Solves with the all-ones vector and reports the first non-finite entry.
fn probe_finite(f: &SparseFactorization) -> Result<()> {
    let x = f.solve(&vec![1.0; f.n]);
    match x.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(Error::SingularPivot { row }),
        None => Ok(()),
    }
}

/// LU factorization with partial pivoting and a fill-reducing column order.
pub fn lu_factorize(a: &CsrMatrix) -> Result<SparseFactorization> {
    check_square(a)?;
    check_structure(a)?;
    let mat = a.to_faer()?;
    let lu = mat.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::SingularPivot { row: index },
        other => Error::Factorization(format!("{other:?}")),
    })?;
    let f = SparseFactorization { n: a.nrows, kind: FactorKind::Lu(lu) };
    probe_finite(&f)?;
    Ok(f)
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Only the lower triangle is read.
pub fn cholesky_factorize(a: &CsrMatrix) -> Result<SparseFactorization> {
    check_square(a)?;
    let mat = a.to_faer()?;
    let llt = mat.sp_cholesky(Side::Lower).map_err(|e| match e {
        faer::sparse::linalg::LltError::Numeric(_) => Error::NotPositiveDefinite,
        other => Error::Factorization(format!("{other:?}")),
    })?;
    Ok(SparseFactorization { n: a.nrows, kind: FactorKind::Cholesky(llt) })
}

/// A symmetric linear map applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
}

/// Identity preconditioner.
pub struct NoPreconditioner;

impl LinearOperator for NoPreconditioner {
    fn dim(&self) -> usize {
        usize::MAX
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Preconditioned residual norm relative to its initial value.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Convergence is measured in the preconditioned residual norm
/// `sqrt(r^T M^{-1} r)` relative to its initial value.
pub fn cg<A, M>(op: &A, rhs: &[f64], precond: &M, opts: CgOptions) -> Result<(Vec<f64>, KrylovStats)>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    let n = rhs.len();
    if op.dim() != n {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: n });
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::OperatorNotSpd { iteration: 0, curvature: rz });
    }
    let r0 = rz.sqrt();
    if r0 == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut stats = KrylovStats { iterations: 0, relative_residual: 1.0, converged: false };
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::OperatorNotSpd { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        stats.iterations = it;
        stats.relative_residual = rz_new.max(0.0).sqrt() / r0;
        if stats.relative_residual <= opts.tol {
            stats.converged = true;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok((x, stats))
}

/// `S = B A^{-1} B^T` applied matrix-free, restricted to mean-zero vectors.
///
/// `B` is the divergence block on free velocity columns and `A` the
/// factorized velocity operator. With all-Dirichlet velocity data the
/// constants span the kernel of `B^T`, so outputs are projected to zero mean.
pub struct SchurOperator {
    b: CsrMatrix,
    bt: CsrMatrix,
    velocity_solver: Arc<SparseFactorization>,
}

impl SchurOperator {
    pub fn new(b_free: CsrMatrix, velocity_solver: Arc<SparseFactorization>) -> Result<Self> {
        if b_free.ncols() != velocity_solver.dim() {
            return Err(Error::DimensionMismatch { expected: velocity_solver.dim(), got: b_free.ncols() });
        }
        let bt = b_free.transpose();
        Ok(Self { b: b_free, bt, velocity_solver })
    }

    pub fn divergence(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn gradient(&self) -> &CsrMatrix {
        &self.bt
    }

    /// `A^{-1} B^T q`.
    pub fn velocity_correction(&self, q: &[f64]) -> Vec<f64> {
        let mut t = self.bt.mul_vec(q);
        self.velocity_solver.solve_in_place(&mut t);
        t
    }
}

impl LinearOperator for SchurOperator {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn apply(&self, q: &[f64], y: &mut [f64]) {
        let t = self.velocity_correction(q);
        self.b.mul_vec_into(&t, y);
        project_mean_zero(y);
    }
}

/// `M^{-1}` by Cholesky, followed by mean-zero projection.
pub struct MassPreconditioner {
    factor: SparseFactorization,
}

impl MassPreconditioner {
    pub fn new(mass: &CsrMatrix) -> Result<Self> {
        Ok(Self { factor: cholesky_factorize(mass)? })
    }
}

impl LinearOperator for MassPreconditioner {
    fn dim(&self) -> usize {
        self.factor.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.factor.solve_in_place(y);
        project_mean_zero(y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_sparse(n: usize, density: f64, rng: &mut StdRng) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen::<f64>() < density {
                    t.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    fn random_spd(n: usize, rng: &mut StdRng) -> CsrMatrix {
        let r = random_sparse(n, 0.1, rng);
        let rtr = r.transpose();
        // R^T R + n I
        let mut t = Vec::new();
        for i in 0..n {
            for (k, v) in rtr.row(i) {
                for (j, w) in r.row(k) {
                    t.push((i, j, v * w));
                }
            }
            t.push((i, i, n as f64 * 0.1 + 1.0));
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    fn residual_ok(a: &CsrMatrix, x: &[f64], b: &[f64], tol: f64) -> bool {
        let ax = a.mul_vec(x);
        let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        norm2(&r) <= tol * (a.frobenius_norm() * norm2(x) + norm2(b))
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 4.0)]);
        assert_eq!(a.row_ptr(), &[0, 1, 3]);
        assert_eq!(a.col_idx(), &[1, 0, 2]);
        assert_eq!(a.values(), &[2.0, 3.0, 5.0]);
        assert_eq!(a.get(1, 2), 5.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn from_parts_validates() {
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn transpose_and_products_agree() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_sparse(30, 0.2, &mut rng);
        let x: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
        let y1 = a.transpose().mul_vec(&x);
        let y2 = a.mul_vec_transpose(&x);
        for (p, q) in y1.iter().zip(&y2) {
            assert!((p - q).abs() < 1e-13);
        }
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn linear_combination_matches_dense() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_sparse(12, 0.3, &mut rng);
        let b = random_sparse(12, 0.3, &mut rng);
        let c = a.linear_combination(2.0, &b, -0.5).to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..12 {
            for j in 0..12 {
                assert!((c[i][j] - (2.0 * da[i][j] - 0.5 * db[i][j])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn submatrix_extracts_block() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]);
        let s = a.submatrix(&[2, 0], &[Some(1), None, Some(0)], 2);
        assert_eq!(s.to_dense(), vec![vec![9.0, 7.0], vec![3.0, 1.0]]);
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = lu_factorize(&CsrMatrix::identity(5)).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(f.solve(&b), b);
    }

    #[test]
    fn two_by_two_hand_solve() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        for f in [lu_factorize(&a).unwrap(), cholesky_factorize(&a).unwrap()] {
            let x = f.solve(&[3.0, 3.0]);
            assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = random_spd(50, &mut rng);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for f in [lu_factorize(&a).unwrap(), cholesky_factorize(&a).unwrap()] {
            let x = f.solve(&b);
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm2(&r) / norm2(&b) <= 1e-11);
        }
    }

    #[test]
    fn factor_solve_residual_bound_on_many_systems() {
        let mut rng = StdRng::seed_from_u64(2024);
        for trial in 0..100 {
            let n = rng.gen_range(5..60);
            let a = if trial % 2 == 0 {
                random_spd(n, &mut rng)
            } else {
                // diagonally dominant nonsymmetric
                let r = random_sparse(n, 0.15, &mut rng);
                r.linear_combination(1.0, &CsrMatrix::identity(n), n as f64 * 0.2 + 1.0)
            };
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = lu_factorize(&a).unwrap().solve(&b);
            assert!(residual_ok(&a, &x, &b, 1e-10), "trial {trial}");
            if trial % 2 == 0 {
                let x = cholesky_factorize(&a).unwrap().solve(&b);
                assert!(residual_ok(&a, &x, &b, 1e-10), "trial {trial} (cholesky)");
            }
        }
    }

    #[test]
    fn singular_pivot_names_row() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]]);
        match lu_factorize(&a) {
            Err(Error::SingularPivot { row }) => assert_eq!(row, 1),
            other => panic!("expected singular pivot, got {other:?}"),
        }
        let b = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(lu_factorize(&b), Err(Error::SingularPivot { .. })));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(cholesky_factorize(&a), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn cg_zero_rhs() {
        let a = CsrMatrix::identity(4);
        let (x, s) = cg(&a, &[0.0; 4], &NoPreconditioner, CgOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(s.iterations, 0);
        assert!(s.converged);
    }

    #[test]
    fn cg_diagonal_distinct_eigenvalues() {
        // 3 distinct eigenvalues -> at most 3 iterations
        let diag = [1.0, 2.0, 2.0, 5.0, 5.0, 1.0, 2.0];
        let a = CsrMatrix::from_triplets(7, 7, &diag.iter().enumerate().map(|(i, d)| (i, i, *d)).collect::<Vec<_>>());
        let b = vec![1.0; 7];
        let (x, s) = cg(&a, &b, &NoPreconditioner, CgOptions { tol: 1e-12, max_iter: 100 }).unwrap();
        assert!(s.converged);
        assert!(s.iterations <= 3, "iterations {}", s.iterations);
        for (xi, d) in x.iter().zip(diag) {
            assert!((xi - 1.0 / d).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_detects_indefinite_operator() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let r = cg(&a, &[0.0, 1.0], &NoPreconditioner, CgOptions::default());
        assert!(matches!(r, Err(Error::OperatorNotSpd { .. })));
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_spd(40, &mut rng);
        let b = vec![1.0; 40];
        let (_, s) = cg(&a, &b, &NoPreconditioner, CgOptions { tol: 1e-14, max_iter: 2 }).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 2);
    }

    #[test]
    fn matrix_market_round_trip() {
        let mut rng = StdRng::seed_from_u64(9);
        let a = random_sparse(9, 0.3, &mut rng);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n9 9 "));
        let back = CsrMatrix::read_matrix_market(&text).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn symmetry_check() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!(a.is_symmetric(0.0));
        let b = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 2.0]]);
        assert!(!b.is_symmetric(1e-3));
    }
}
