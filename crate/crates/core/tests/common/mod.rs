//! Reference routines for the integration tests. Written against plain
//! `Vec<f64>` storage so they share no code with the library kernels.
#![allow(dead_code)]

use gsopt_core::{DenseMatrix, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Square matrix as nested rows.
pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &DenseMatrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn from_rows(r: &Rows) -> DenseMatrix {
    let n = r.len();
    let c = if n == 0 { 0 } else { r[0].len() };
    DenseMatrix::from_fn(n, c, |i, j| r[i][j])
}

pub fn mul(a: &Rows, b: &Rows) -> Rows {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            for j in 0..m {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Rows) -> Rows {
    let (n, m) = (a.len(), a[0].len());
    (0..m).map(|j| (0..n).map(|i| a[i][j]).collect()).collect()
}

/// Cyclic Jacobi rotations. Returns ascending eigenvalues and the matching
/// eigenvectors as columns.
pub fn jacobi_eig(s: &Rows) -> (Vec<f64>, Rows) {
    let n = s.len();
    let mut a = s.clone();
    let mut v: Rows = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - sn * vkq;
                    v[k][q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n)
        .map(|r| order.iter().map(|&c| v[r][c]).collect())
        .collect();
    (vals, vecs)
}

/// Lower Cholesky factor.
pub fn cholesky(m: &Rows) -> Rows {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                assert!(d > 0.0, "matrix not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &Rows) -> Rows {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        for i in c..n {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (c..i).map(|k| l[i][k] * inv[k][c]).sum();
            inv[i][c] = (rhs - s) / l[i][i];
        }
    }
    inv
}

/// Eigenvalues of the pencil `A v = lambda M v`, ascending, through the
/// Cholesky reduction `L^{-1} A L^{-T}`.
pub fn generalized_eig(a: &Rows, m: &Rows) -> Vec<f64> {
    let li = lower_inverse(&cholesky(m));
    let w = mul(&mul(&li, a), &transpose(&li));
    let n = w.len();
    let sym: Rows = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (w[i][j] + w[j][i])).collect())
        .collect();
    jacobi_eig(&sym).0
}

/// Singular values of `K`, descending, from the eigenvalues of `K^T K`.
pub fn singular_values(k: &Rows) -> Vec<f64> {
    let ktk = mul(&transpose(k), k);
    let mut s: Vec<f64> = jacobi_eig(&ktk)
        .0
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    s.reverse();
    s
}

/// Random SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`,
/// built as `Q diag Q^T` with `Q` from Gram-Schmidt.
pub fn spd(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> SymMatrix {
    let eig: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    spd_with_eigs(&eig, rng)
}

pub fn spd_with_eigs(eig: &[f64], rng: &mut impl Rng) -> SymMatrix {
    let n = eig.len();
    let q = gram_schmidt(&to_rows(&normal(n, n, rng)));
    SymMatrix::from_upper_fn(n, |i, j| (0..n).map(|k| q[i][k] * eig[k] * q[j][k]).sum())
}

/// Orthonormalizes the columns of a square matrix.
pub fn gram_schmidt(a: &Rows) -> Rows {
    let n = a.len();
    let m = a[0].len();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| a[i][j]).collect()).collect();
    for j in 0..m {
        for _ in 0..2 {
            for k in 0..j {
                let d: f64 = (0..n).map(|i| cols[j][i] * cols[k][i]).sum();
                for i in 0..n {
                    cols[j][i] -= d * cols[k][i];
                }
            }
        }
        let nrm: f64 = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= nrm;
        }
    }
    (0..n)
        .map(|i| (0..m).map(|j| cols[j][i]).collect())
        .collect()
}

/// Central differences of `f` at `x`.
pub fn fd_grad(f: impl Fn(&DenseMatrix) -> f64, x: &DenseMatrix, t: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[(i, j)] += t;
            xm[(i, j)] -= t;
            out[(i, j)] = (f(&xp) - f(&xm)) / (2.0 * t);
        }
    }
    out
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// `X^T M X` with a dense `M`, entrywise.
pub fn dense_gram(x: &DenseMatrix, m: &DenseMatrix) -> Rows {
    let xr = to_rows(x);
    mul(&mul(&transpose(&xr), &to_rows(m)), &xr)
}

/// Frobenius distance of `X^T M X` from the identity.
pub fn dense_feas(x: &DenseMatrix, m: &DenseMatrix) -> f64 {
    let c = dense_gram(x, m);
    let mut s = 0.0;
    for (i, row) in c.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let d = v - if i == j { 1.0 } else { 0.0 };
            s += d * d;
        }
    }
    s.sqrt()
}
