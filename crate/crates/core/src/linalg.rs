//! Dense row-major matrices and the small symmetric kernels used throughout
//! the crate.
//!
//! Every object the optimizers keep between iterations is either an `n x p`
//! [`DenseMatrix`] or a `p x p` [`SymMatrix`]; nothing of size `n x n` is ever
//! formed on the optimization path. Symmetric eigendecompositions are only
//! run on `p x p` matrices and on oracle-sized problems in tests.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default lower bound on the eigenvalues accepted by [`spd_inv_sqrt`].
pub const SPD_TOLERANCE: f64 = 1e-10;

/// Largest dimension [`sym_eig`] is intended for. Larger inputs work but the
/// cubic cost is not something the optimizers ever pay.
pub const SYM_EIG_MAX_DIM: usize = 2048;

/// A dense `rows x cols` real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "DenseMatrix::from_vec",
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
                value: data[pos],
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::dim(
                    "DenseMatrix::from_rows",
                    format!("{c} columns"),
                    format!("{} columns in row {i}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols,
            other.rows,
            "matmul shape mismatch: {:?} * {:?}",
            self.shape(),
            other.shape()
        );
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        let oc = other.cols;
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * oc..(i + 1) * oc];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * oc..(k + 1) * oc];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other` without forming the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.rows,
            other.rows,
            "t_matmul shape mismatch: {:?}^T * {:?}",
            self.shape(),
            other.shape()
        );
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        let oc = other.cols;
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * oc..(i + 1) * oc];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &DenseMatrix) {
        assert_eq!(self.shape(), x.shape(), "axpy shape mismatch");
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Frobenius inner product `tr(self^T other)`.
    pub fn dot(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Copies rows `range` into a new matrix.
    pub fn row_block(&self, start: usize, len: usize) -> DenseMatrix {
        DenseMatrix {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        }
    }

    pub fn set_row_block(&mut self, start: usize, block: &DenseMatrix) {
        assert_eq!(block.cols, self.cols);
        let c = self.cols;
        self.data[start * c..(start + block.rows) * c].copy_from_slice(&block.data);
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for v in self.row(i).iter().take(12) {
                write!(f, "{v:>12.5e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Add for DenseMatrix {
    type Output = DenseMatrix;
    fn add(mut self, rhs: DenseMatrix) -> DenseMatrix {
        self += &rhs;
        self
    }
}

impl Sub for DenseMatrix {
    type Output = DenseMatrix;
    fn sub(mut self, rhs: DenseMatrix) -> DenseMatrix {
        self -= &rhs;
        self
    }
}

impl AddAssign<&DenseMatrix> for DenseMatrix {
    fn add_assign(&mut self, rhs: &DenseMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&DenseMatrix> for DenseMatrix {
    fn sub_assign(&mut self, rhs: &DenseMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scale(rhs)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.map(|v| -v)
    }
}

/// A square matrix whose entries satisfy `a(i, j) == a(j, i)` bit for bit.
///
/// The only ways to build one either copy one triangle onto the other or
/// average `A` and `A^T`, so symmetry never depends on floating-point luck.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DenseMatrix);

impl SymMatrix {
    pub fn zeros(p: usize) -> Self {
        SymMatrix(DenseMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DenseMatrix::identity(p))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        SymMatrix(DenseMatrix::from_diag(diag))
    }

    /// Builds from the upper triangle (`i <= j`) of `f`.
    pub fn from_upper_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `self^2`, exactly symmetric because both triangles accumulate the same
    /// products in the same order.
    pub fn square(&self) -> SymMatrix {
        SymMatrix(self.0.matmul(&self.0))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(self.0.scale(s))
    }

    /// `a * self + b * I`.
    pub fn affine(&self, a: f64, b: f64) -> SymMatrix {
        let mut m = self.0.scale(a);
        for i in 0..m.rows {
            m[(i, i)] += b;
        }
        SymMatrix(m)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn all_finite(&self) -> bool {
        self.0.all_finite()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym")?;
        self.0.fmt(f)
    }
}

impl std::ops::Deref for SymMatrix {
    type Target = DenseMatrix;
    fn deref(&self) -> &DenseMatrix {
        &self.0
    }
}

/// A linear map on `n x p` matrices, typically `X -> M X` for an implicit
/// `n x n` matrix `M`.
pub trait LinearOperator: Send + Sync {
    /// Row dimension `n` of the matrices the operator acts on.
    fn dim(&self) -> usize;

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix;
}

/// Explicit dense operator. Only meant for small problems and tests.
#[derive(Clone, Debug)]
pub struct DenseOperator(pub DenseMatrix);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        self.0.matmul(x)
    }
}

/// Identity operator on `n`-row matrices.
#[derive(Clone, Copy, Debug)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        x.clone()
    }
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DenseMatrix) -> Result<SymMatrix> {
    if !a.is_square() {
        return Err(Error::dim(
            "symmetrize",
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    Ok(SymMatrix::from_upper_fn(a.rows(), |i, j| {
        if i == j {
            a[(i, i)]
        } else {
            0.5 * (a[(i, j)] + a[(j, i)])
        }
    }))
}

/// Symmetrization of a matrix already known to be square.
pub(crate) fn sym_part(a: &DenseMatrix) -> SymMatrix {
    symmetrize(a).expect("square by construction")
}

/// `sym(X^T (M X))` given the precomputed action `mx = M X`.
pub(crate) fn gram_with(x: &DenseMatrix, mx: &DenseMatrix) -> SymMatrix {
    sym_part(&x.t_matmul(mx))
}

/// `sym(X^T M X)` for the operator `M`.
pub fn gram(x: &DenseMatrix, op: &dyn LinearOperator) -> Result<SymMatrix> {
    if op.dim() != x.rows() {
        return Err(Error::dim(
            "gram",
            format!("{} rows", op.dim()),
            format!("{} rows", x.rows()),
        ));
    }
    let mx = op.apply(x);
    if mx.shape() != x.shape() {
        return Err(Error::dim(
            "gram",
            format!("{:?}", x.shape()),
            format!("{:?}", mx.shape()),
        ));
    }
    Ok(gram_with(x, &mx))
}

/// `X (3/2 I - 1/2 C)`, where `C` is `X^T M X` or an estimate of it.
pub fn constraint_dissolving_op(x: &DenseMatrix, c: &SymMatrix) -> Result<DenseMatrix> {
    if c.dim() != x.cols() {
        return Err(Error::dim(
            "constraint_dissolving_op",
            format!("{0}x{0}", x.cols()),
            format!("{0}x{0}", c.dim()),
        ));
    }
    if *c == SymMatrix::identity(c.dim()) {
        return Ok(x.clone());
    }
    Ok(x.matmul(&c.affine(-0.5, 1.5)))
}

/// Ascending eigenvalues and orthonormal eigenvectors (as columns) of `s`.
pub fn sym_eig(s: &SymMatrix) -> (Vec<f64>, DenseMatrix) {
    debug_assert!(s.dim() <= SYM_EIG_MAX_DIM);
    let p = s.dim();
    if p == 0 {
        return (Vec::new(), DenseMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(s.to_nalgebra());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DenseMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// `V diag(f(lambda)) V^T` for a spectral function `f`.
pub fn sym_fn(s: &SymMatrix, f: impl Fn(f64) -> f64) -> SymMatrix {
    let (vals, vecs) = sym_eig(s);
    let p = s.dim();
    SymMatrix::from_upper_fn(p, |i, j| {
        (0..p)
            .map(|k| vecs[(i, k)] * f(vals[k]) * vecs[(j, k)])
            .sum()
    })
}

/// `S^{-1/2}` with the default eigenvalue floor [`SPD_TOLERANCE`].
pub fn spd_inv_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    spd_inv_sqrt_tol(s, SPD_TOLERANCE)
}

pub fn spd_inv_sqrt_tol(s: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    if !s.all_finite() {
        return Err(Error::NotPositiveDefinite {
            min_eig: f64::NAN,
            tol,
        });
    }
    let (vals, vecs) = sym_eig(s);
    if let Some(&min_eig) = vals.first() {
        if min_eig <= tol {
            return Err(Error::NotPositiveDefinite { min_eig, tol });
        }
    }
    let p = s.dim();
    Ok(SymMatrix::from_upper_fn(p, |i, j| {
        (0..p)
            .map(|k| vecs[(i, k)] * vecs[(j, k)] / vals[k].sqrt())
            .sum()
    }))
}

/// `||C - I||_F`.
pub fn feasibility_violation(c: &SymMatrix) -> f64 {
    let p = c.dim();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            let d = c.get(i, j) - if i == j { 1.0 } else { 0.0 };
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Largest and smallest eigenvalue of a symmetric matrix.
pub fn extreme_eigs(s: &SymMatrix) -> (f64, f64) {
    let (vals, _) = sym_eig(s);
    (
        vals.first().copied().unwrap_or(0.0),
        vals.last().copied().unwrap_or(0.0),
    )
}

/// Orthonormalizes the columns of `a` with modified Gram-Schmidt.
/// Columns that become numerically zero are left as zero.
pub fn orthonormalize_columns(a: &DenseMatrix) -> DenseMatrix {
    let mut q = a.clone();
    let (n, p) = a.shape();
    for j in 0..p {
        for k in 0..j {
            let r: f64 = (0..n).map(|i| q[(i, k)] * q[(i, j)]).sum();
            for i in 0..n {
                let v = q[(i, k)];
                q[(i, j)] -= r * v;
            }
        }
        let nrm: f64 = (0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        if nrm > 1e-300 {
            for i in 0..n {
                q[(i, j)] /= nrm;
            }
        }
    }
    q
}

/// `X (X^T M X)^{-1/2}`, a point on the generalized Stiefel manifold of `M`.
pub fn m_orthonormalize(x: &DenseMatrix, op: &dyn LinearOperator) -> Result<DenseMatrix> {
    let mut out = x.clone();
    // a second pass removes the round-off left by an ill-conditioned first gram
    for _ in 0..2 {
        let c = gram(&out, op)?;
        out = out.matmul(spd_inv_sqrt(&c)?.as_dense());
    }
    Ok(out)
}
