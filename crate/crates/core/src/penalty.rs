//! The constraint-dissolving penalty
//!
//! ```text
//! h(X) = f(A(X)) + beta/6 tr(C (C^2 - 3 I)),   C = X^T M X,
//! A(X) = X (3/2 I - 1/2 C)
//! ```
//!
//! evaluated with exact (full-expectation) oracles: value, gradient,
//! Hessian-vector product, stationarity diagnostics and the penalty threshold.

use crate::error::{Error, Result};
use crate::linalg::{
    constraint_dissolving_op, extreme_eigs, feasibility_violation, gram_with, sym_part,
    DenseMatrix, SymMatrix,
};
use crate::objective::{ConstantConstraint, SmoothObjective};

/// Penalty weight `beta > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyParams {
    beta: f64,
}

impl PenaltyParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!(
                "penalty weight must be positive, got {beta}"
            )));
        }
        Ok(PenaltyParams { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// First-order diagnostics at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityReport {
    /// `||grad h(X)||`
    pub grad_h_norm: f64,
    /// `||grad f(X) - M X sym(X^T grad f(X))||`
    pub kkt_norm: f64,
    /// `||X^T M X - I||`
    pub feas: f64,
    /// `sigma_max(X^T M X) <= 1`
    pub in_omega: bool,
    /// `||X^T M X - I|| <= 1/6`
    pub in_omega_r: bool,
}

/// Radius of the neighborhood reported in [`StationarityReport::in_omega_r`].
pub const OMEGA_RADIUS: f64 = 1.0 / 6.0;

fn check_shapes(x: &DenseMatrix, cons: &ConstantConstraint) -> Result<()> {
    if x.rows() != cons.dim() {
        return Err(Error::dim(
            "penalty",
            format!("{} rows", cons.dim()),
            format!("{} rows", x.rows()),
        ));
    }
    Ok(())
}

/// `tr(C (C^2 - 3 I))`, bounded below by `-2p` for PSD `C`.
pub fn penalty_trace(c: &SymMatrix) -> f64 {
    let c2 = c.square();
    c2.dot(c) - 3.0 * c.trace()
}

/// Direction shared by the exact gradient and the stochastic estimator:
///
/// `G (3/2 I - 1/2 Y) + M X (beta (Y^2 - I) - sym(X^T G))`
///
/// where `g = grad f(X (3/2 I - 1/2 Y))` and `mx = M X` (exact or sampled).
pub(crate) fn direction_kernel(
    x: &DenseMatrix,
    y: &SymMatrix,
    g: &DenseMatrix,
    mx: &DenseMatrix,
    beta: f64,
) -> DenseMatrix {
    let lambda = sym_part(&x.t_matmul(g));
    let coeff = y.square().affine(beta, -beta).sub(&lambda);
    let mut out = g.matmul(&y.affine(-0.5, 1.5));
    out += &mx.matmul(&coeff);
    out
}

pub fn h_value(
    x: &DenseMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    params: PenaltyParams,
) -> Result<f64> {
    check_shapes(x, cons)?;
    let c = gram_with(x, &cons.apply(x));
    let ax = constraint_dissolving_op(x, &c)?;
    Ok(obj.value(&ax) + params.beta / 6.0 * penalty_trace(&c))
}

pub fn h_grad(
    x: &DenseMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    params: PenaltyParams,
) -> Result<DenseMatrix> {
    check_shapes(x, cons)?;
    let mx = cons.apply(x);
    let c = gram_with(x, &mx);
    let g = obj.gradient(&constraint_dissolving_op(x, &c)?);
    Ok(direction_kernel(x, &c, &g, &mx, params.beta))
}

/// Hessian-vector product `nabla^2 h(X)[D]`.
///
/// The penalty block is differentiated directly, giving
/// `beta M D (C^2 - I) + 2 beta M X (S C + C S)` with `S = sym(X^T M D)`,
/// which keeps the operator self-adjoint for every `X`.
pub fn h_hess_vec(
    x: &DenseMatrix,
    d: &DenseMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    params: PenaltyParams,
) -> Result<DenseMatrix> {
    check_shapes(x, cons)?;
    if d.shape() != x.shape() {
        return Err(Error::dim(
            "h_hess_vec",
            format!("{:?}", x.shape()),
            format!("{:?}", d.shape()),
        ));
    }
    let beta = params.beta;
    let mx = cons.apply(x);
    let md = cons.apply(d);
    let c = gram_with(x, &mx);
    let s = sym_part(&x.t_matmul(&md));
    let cd = c.affine(-0.5, 1.5);

    let ax = x.matmul(&cd);
    let g = obj.gradient(&ax);
    let mut da = d.matmul(&cd);
    da -= &x.matmul(&s);
    let jg = obj
        .hess_vec(&ax, &da)
        .ok_or(Error::Capability("objective Hessian-vector product"))?;

    let mut out = jg.matmul(&cd);
    out -= &g.matmul(&s);
    out -= &md.matmul(&sym_part(&x.t_matmul(&g)));
    let coeff_mx = {
        let sc = s.matmul(&c);
        let sc_cs = &sc + &sc.transpose();
        let mut m = sc_cs.scale(2.0 * beta);
        m -= &sym_part(&d.t_matmul(&g));
        m -= &sym_part(&x.t_matmul(&jg));
        m
    };
    out += &mx.matmul(&coeff_mx);
    out += &md.matmul(&c.square().affine(beta, -beta));
    Ok(out)
}

/// `L(X) = grad f(X) - M X sym(X^T grad f(X))`.
pub fn kkt_field(
    x: &DenseMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
) -> Result<DenseMatrix> {
    check_shapes(x, cons)?;
    let g = obj.gradient(x);
    let mx = cons.apply(x);
    let mut l = g.clone();
    l -= &mx.matmul(&sym_part(&x.t_matmul(&g)));
    Ok(l)
}

pub fn kkt_residual(
    x: &DenseMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    params: PenaltyParams,
) -> Result<StationarityReport> {
    let l = kkt_field(x, obj, cons)?;
    let grad_h = h_grad(x, obj, cons, params)?;
    let c = gram_with(x, &cons.apply(x));
    let feas = feasibility_violation(&c);
    let (_, c_max) = extreme_eigs(&c);
    Ok(StationarityReport {
        grad_h_norm: grad_h.norm(),
        kkt_norm: l.norm(),
        feas,
        in_omega: c_max <= 1.0,
        in_omega_r: feas <= OMEGA_RADIUS,
    })
}

/// `|<X Q, grad h(X)> - tr((beta C (C + I) - 3/2 Lambda)(C - I) Q)|` for a
/// symmetric `Q` commuting with `C = X^T M X`.
pub fn inner_product_identity_check(
    x: &DenseMatrix,
    q: &SymMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    params: PenaltyParams,
) -> Result<f64> {
    check_shapes(x, cons)?;
    let p = x.cols();
    if q.dim() != p {
        return Err(Error::dim(
            "inner_product_identity_check",
            format!("{p}x{p}"),
            format!("{0}x{0}", q.dim()),
        ));
    }
    let beta = params.beta;
    let c = gram_with(x, &cons.apply(x));
    let commutator = &q.matmul(&c) - &c.matmul(q);
    if commutator.norm() > 1e-8 {
        return Err(Error::Precondition(format!(
            "Q does not commute with X^T M X (||QC - CQ|| = {:e})",
            commutator.norm()
        )));
    }
    let grad = h_grad(x, obj, cons, params)?;
    let lhs = x.matmul(q).dot(&grad);

    let g = obj.gradient(&constraint_dissolving_op(x, &c)?);
    let lambda = sym_part(&x.t_matmul(&g));
    let left = {
        let mut m = c.matmul(&c.affine(1.0, 1.0)).scale(beta);
        m -= &lambda.scale(1.5);
        m
    };
    let rhs = left.matmul(&c.affine(1.0, -1.0)).matmul(q).trace();
    Ok((lhs - rhs).abs())
}

/// Penalty threshold
/// `12 kappa(M) (3 (p + 1) L_g + sigma_min(M)^{1/2} L_0) / sigma_min(M)`.
pub fn beta_threshold(
    p: usize,
    lipschitz_grad: f64,
    grad_at_zero: f64,
    sigma_min_m: f64,
    sigma_max_m: f64,
) -> Result<f64> {
    if !(sigma_min_m > 0.0) {
        return Err(Error::Domain(format!(
            "sigma_min(M) must be positive, got {sigma_min_m}"
        )));
    }
    if !(lipschitz_grad >= 0.0) || !(grad_at_zero >= 0.0) || sigma_max_m < sigma_min_m {
        return Err(Error::Domain(format!(
            "invalid threshold inputs: L_g={lipschitz_grad}, L_0={grad_at_zero}, sigma=[{sigma_min_m}, {sigma_max_m}]"
        )));
    }
    let kappa = sigma_max_m / sigma_min_m;
    Ok(
        12.0 * kappa
            * (3.0 * (p as f64 + 1.0) * lipschitz_grad + sigma_min_m.sqrt() * grad_at_zero)
            / sigma_min_m,
    )
}

/// Smallest eigenvalue of `nabla^2 h(X)` and a matching unit direction,
/// by shifted power iteration on Hessian-vector products.
pub fn min_hessian_eigenvalue(
    x: &DenseMatrix,
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    params: PenaltyParams,
    start: &DenseMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<(f64, DenseMatrix)> {
    let hv = |v: &DenseMatrix| h_hess_vec(x, v, obj, cons, params);

    // spectral radius bound from plain power iteration
    let mut v = start.scale(1.0 / start.norm());
    let mut radius = 0.0_f64;
    for _ in 0..max_iters.min(500) {
        let w = hv(&v)?;
        let nrm = w.norm();
        if nrm == 0.0 {
            break;
        }
        let converged = (nrm - radius).abs() <= tol * nrm.max(1.0);
        radius = nrm;
        v = w.scale(1.0 / nrm);
        if converged {
            break;
        }
    }
    let shift = 1.05 * radius + tol;

    let mut v = start.scale(1.0 / start.norm());
    let mut mu = f64::NAN;
    for _ in 0..max_iters {
        let mut w = v.scale(shift);
        w -= &hv(&v)?;
        let next_mu = v.dot(&w);
        let nrm = w.norm();
        if nrm == 0.0 {
            break;
        }
        v = w.scale(1.0 / nrm);
        let converged = (next_mu - mu).abs() <= 0.01 * tol;
        mu = next_mu;
        if converged {
            break;
        }
    }
    let rayleigh = v.dot(&hv(&v)?);
    Ok((rayleigh, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{IdentityOperator, LinearOperator};
    use crate::objective::QuadraticObjective;
    use std::sync::Arc;

    fn scalar_problem() -> (QuadraticObjective, ConstantConstraint) {
        let obj = QuadraticObjective::new(SymMatrix::identity(1));
        let cons = ConstantConstraint::new(Arc::new(IdentityOperator(1)), 1.0, 1.0).unwrap();
        (obj, cons)
    }

    #[test]
    fn scalar_value_and_gradient() {
        let (obj, cons) = scalar_problem();
        let params = PenaltyParams::new(6.0).unwrap();
        let x = DenseMatrix::from_diag(&[1.0]);
        assert!((h_value(&x, &obj, &cons, params).unwrap() + 1.5).abs() < 1e-15);
        assert_eq!(h_grad(&x, &obj, &cons, params).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn value_at_origin_is_objective_at_origin() {
        let a = SymMatrix::from_diag(&[1.0, 2.0, 3.0]);
        let b = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let obj = QuadraticObjective::with_linear(a, b.clone()).unwrap();
        let cons = ConstantConstraint::new(Arc::new(IdentityOperator(3)), 1.0, 1.0).unwrap();
        let params = PenaltyParams::new(2.0).unwrap();
        let zero = DenseMatrix::zeros(3, 2);
        assert_eq!(h_value(&zero, &obj, &cons, params).unwrap(), 0.0);
        let g = h_grad(&zero, &obj, &cons, params).unwrap();
        assert!((&g - &b.scale(1.5)).max_abs() < 1e-15);
        let hv = h_hess_vec(&zero, &DenseMatrix::zeros(3, 2), &obj, &cons, params).unwrap();
        assert_eq!(hv.norm(), 0.0);
    }

    #[test]
    fn feasible_value_shift() {
        // C = I gives h = f(X) - beta p / 3
        let obj = QuadraticObjective::new(SymMatrix::from_diag(&[1.0, 3.0, 5.0]));
        let cons = ConstantConstraint::new(Arc::new(IdentityOperator(3)), 1.0, 1.0).unwrap();
        let params = PenaltyParams::new(3.0).unwrap();
        let x = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]]).unwrap();
        let h = h_value(&x, &obj, &cons, params).unwrap();
        assert!((h - (obj.value(&x) - 3.0 * 2.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn kkt_at_origin() {
        let b = DenseMatrix::from_fn(3, 2, |i, j| 1.0 + i as f64 - j as f64);
        let obj = QuadraticObjective::with_linear(SymMatrix::identity(3), b.clone()).unwrap();
        let cons = ConstantConstraint::new(Arc::new(IdentityOperator(3)), 1.0, 1.0).unwrap();
        let r = kkt_residual(
            &DenseMatrix::zeros(3, 2),
            &obj,
            &cons,
            PenaltyParams::new(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(r.kkt_norm, b.norm());
        assert!((r.feas - 2f64.sqrt()).abs() < 1e-15);
        assert!(r.in_omega);
        assert!(!r.in_omega_r);
    }

    #[test]
    fn hess_vec_requires_capability() {
        struct NoHess;
        impl SmoothObjective for NoHess {
            fn value(&self, _: &DenseMatrix) -> f64 {
                0.0
            }
            fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
                DenseMatrix::zeros(x.rows(), x.cols())
            }
        }
        let cons = ConstantConstraint::new(Arc::new(IdentityOperator(2)), 1.0, 1.0).unwrap();
        let x = DenseMatrix::zeros(2, 1);
        assert!(matches!(
            h_hess_vec(&x, &x, &NoHess, &cons, PenaltyParams::new(1.0).unwrap()),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn identity_check_rejects_noncommuting_q() {
        let obj = QuadraticObjective::new(SymMatrix::identity(2));
        let cons = ConstantConstraint::new(Arc::new(IdentityOperator(2)), 1.0, 1.0).unwrap();
        let x = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]).unwrap();
        let q = SymMatrix::from_upper_fn(2, |i, j| if i == j { 0.0 } else { 1.0 });
        assert!(matches!(
            inner_product_identity_check(&x, &q, &obj, &cons, PenaltyParams::new(1.0).unwrap()),
            Err(Error::Precondition(_))
        ));
        let r = inner_product_identity_check(
            &DenseMatrix::identity(2),
            &SymMatrix::identity(2),
            &obj,
            &cons,
            PenaltyParams::new(1.0).unwrap(),
        )
        .unwrap();
        assert!(r < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(beta_threshold(1, 1.0, 0.0, 1.0, 1.0).unwrap(), 72.0);
        assert_eq!(beta_threshold(1, 1.0, 0.0, 2.0, 2.0).unwrap(), 36.0);
        let base = beta_threshold(3, 0.7, 0.0, 0.5, 2.0).unwrap();
        let scaled = beta_threshold(3, 7.0, 0.0, 0.5, 2.0).unwrap();
        assert!((scaled - 10.0 * base).abs() < 1e-9 * scaled);
        assert!(beta_threshold(1, 1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn penalty_params_reject_nonpositive() {
        assert!(PenaltyParams::new(0.0).is_err());
        assert!(PenaltyParams::new(-1.0).is_err());
        assert!(PenaltyParams::new(f64::NAN).is_err());
    }

    #[test]
    fn penalty_trace_lower_bound() {
        for t in [0.0, 0.3, 1.0, 1.7, 5.0] {
            let c = SymMatrix::from_diag(&[t, 1.0]);
            assert!(penalty_trace(&c) >= -4.0 - 1e-12);
        }
        let _ = IdentityOperator(1).dim();
    }
}
