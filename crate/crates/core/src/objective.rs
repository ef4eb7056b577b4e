//! Deterministic smooth objectives and constant constraint operators.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    extreme_eigs, sym_eig, sym_part, DenseMatrix, DenseOperator, LinearOperator, SymMatrix,
};

/// A differentiable objective `f` on `n x p` matrices.
pub trait SmoothObjective: Send + Sync {
    fn value(&self, x: &DenseMatrix) -> f64;

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix;

    /// `nabla^2 f(x)[d]`, when the objective can supply it.
    fn hess_vec(&self, _x: &DenseMatrix, _d: &DenseMatrix) -> Option<DenseMatrix> {
        None
    }
}

impl<T: SmoothObjective + ?Sized> SmoothObjective for Arc<T> {
    fn value(&self, x: &DenseMatrix) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        (**self).gradient(x)
    }
    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Option<DenseMatrix> {
        (**self).hess_vec(x, d)
    }
}

/// `f(X) = 1/2 tr(X^T A X) + tr(B^T X)` with symmetric `A`.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    a: SymMatrix,
    linear: Option<DenseMatrix>,
}

impl QuadraticObjective {
    pub fn new(a: SymMatrix) -> Self {
        QuadraticObjective { a, linear: None }
    }

    pub fn with_linear(a: SymMatrix, linear: DenseMatrix) -> Result<Self> {
        if linear.rows() != a.dim() {
            return Err(Error::dim(
                "QuadraticObjective::with_linear",
                format!("{} rows", a.dim()),
                format!("{} rows", linear.rows()),
            ));
        }
        Ok(QuadraticObjective {
            a,
            linear: Some(linear),
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }

    /// Lipschitz constant of the gradient, `max |lambda(A)|`.
    pub fn lipschitz(&self) -> f64 {
        let (lo, hi) = extreme_eigs(&self.a);
        lo.abs().max(hi.abs())
    }

    /// `||grad f(0)||`.
    pub fn grad_norm_at_zero(&self) -> f64 {
        self.linear.as_ref().map_or(0.0, DenseMatrix::norm)
    }
}

impl SmoothObjective for QuadraticObjective {
    fn value(&self, x: &DenseMatrix) -> f64 {
        let ax = self.a.matmul(x);
        let mut v = 0.5 * x.dot(&ax);
        if let Some(b) = &self.linear {
            v += b.dot(x);
        }
        v
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut g = self.a.matmul(x);
        if let Some(b) = &self.linear {
            g += b;
        }
        g
    }

    fn hess_vec(&self, _x: &DenseMatrix, d: &DenseMatrix) -> Option<DenseMatrix> {
        Some(self.a.matmul(d))
    }
}

/// Separable `f(X) = sum_ij w_ij log cosh(x_ij - t_ij)`; smooth, non-quadratic
/// and with a globally Lipschitz gradient.
#[derive(Clone, Debug)]
pub struct LogCoshObjective {
    weights: DenseMatrix,
    shift: DenseMatrix,
}

impl LogCoshObjective {
    pub fn new(weights: DenseMatrix, shift: DenseMatrix) -> Result<Self> {
        if weights.shape() != shift.shape() {
            return Err(Error::dim(
                "LogCoshObjective::new",
                format!("{:?}", weights.shape()),
                format!("{:?}", shift.shape()),
            ));
        }
        Ok(LogCoshObjective { weights, shift })
    }
}

fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl SmoothObjective for LogCoshObjective {
    fn value(&self, x: &DenseMatrix) -> f64 {
        x.as_slice()
            .iter()
            .zip(self.shift.as_slice())
            .zip(self.weights.as_slice())
            .map(|((&xi, &t), &w)| w * log_cosh(xi - t))
            .sum()
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        let z = x - &self.shift;
        z.zip_map(&self.weights, |z, w| w * z.tanh())
    }

    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Option<DenseMatrix> {
        let z = x - &self.shift;
        let curv = z.zip_map(&self.weights, |z, w| {
            let c = z.cosh();
            w / (c * c)
        });
        Some(curv.zip_map(d, |c, d| c * d))
    }
}

/// Sum of two objectives.
pub struct SumObjective<A, B>(pub A, pub B);

impl<A: SmoothObjective, B: SmoothObjective> SmoothObjective for SumObjective<A, B> {
    fn value(&self, x: &DenseMatrix) -> f64 {
        self.0.value(x) + self.1.value(x)
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        self.0.gradient(x) + self.1.gradient(x)
    }

    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Option<DenseMatrix> {
        Some(self.0.hess_vec(x, d)? + self.1.hess_vec(x, d)?)
    }
}

/// The expected constraint matrix `M` as an operator, together with its
/// extreme eigenvalues.
#[derive(Clone)]
pub struct ConstantConstraint {
    op: Arc<dyn LinearOperator>,
    sigma_min: f64,
    sigma_max: f64,
}

impl std::fmt::Debug for ConstantConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstantConstraint")
            .field("n", &self.op.dim())
            .field("sigma_min", &self.sigma_min)
            .field("sigma_max", &self.sigma_max)
            .finish()
    }
}

impl ConstantConstraint {
    pub fn new(op: Arc<dyn LinearOperator>, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || sigma_max < sigma_min {
            return Err(Error::Domain(format!(
                "constraint spectrum must satisfy 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        Ok(ConstantConstraint {
            op,
            sigma_min,
            sigma_max,
        })
    }

    /// Wraps an explicit SPD matrix, computing its spectrum exactly.
    pub fn from_dense(m: SymMatrix) -> Result<Self> {
        let (lo, hi) = extreme_eigs(&m);
        Self::new(Arc::new(DenseOperator(m.into_dense())), lo, hi)
    }

    /// Estimates the extreme eigenvalues of a matrix-free SPD operator with
    /// power iterations (on `M` and on `sigma_max I - M`).
    pub fn with_estimated_spectrum(op: Arc<dyn LinearOperator>, iters: usize) -> Result<Self> {
        let n = op.dim();
        let start = DenseMatrix::from_fn(n, 1, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
        let hi = power_iteration(|v| op.apply(v), &start, iters);
        let shift = hi * 1.0001;
        let top = power_iteration(
            |v| {
                let mut w = v.scale(shift);
                w -= &op.apply(v);
                w
            },
            &start,
            iters,
        );
        let lo = shift - top;
        Self::new(op, lo, hi)
    }

    pub fn operator(&self) -> &Arc<dyn LinearOperator> {
        &self.op
    }

    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        self.op.apply(x)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }
}

/// Rayleigh-quotient power iteration; returns the dominant eigenvalue of a
/// symmetric operator acting on `start`-shaped matrices.
pub(crate) fn power_iteration(
    apply: impl Fn(&DenseMatrix) -> DenseMatrix,
    start: &DenseMatrix,
    iters: usize,
) -> f64 {
    let mut v = start.scale(1.0 / start.norm());
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        lambda = v.dot(&w);
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        v = w.scale(1.0 / nrm);
    }
    lambda
}

/// Smallest eigenvalues of the generalized pencil `A v = lambda M v`,
/// ascending, computed densely as `eig(M^{-1/2} A M^{-1/2})`.
pub fn generalized_eigenvalues(a: &SymMatrix, m: &SymMatrix) -> Result<Vec<f64>> {
    let r = crate::linalg::spd_inv_sqrt(m)?;
    let w = sym_part(&r.matmul(a).matmul(&r));
    Ok(sym_eig(&w).0)
}
