//! Tracking-based stochastic gradient methods, plain and with AMSGrad-style
//! elementwise step sizes.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{gram, spd_inv_sqrt, DenseMatrix, SymMatrix};
use crate::oracle::{c_theta, h_xi_value, w_direction, ConstraintSample, StochasticProblem};
use crate::penalty::{h_value, kkt_residual, PenaltyParams};

use super::{IterView, MetricRow, RunOptions, RunOutput, RunRecord, RunSummary, StepSchedule};

/// `Y - b (Y - C_theta(X_old)) + (C_theta(X_new) - C_theta(X_old))`, evaluated
/// as `(1 - b)(Y - C_old) + C_new` so that `b = 1` returns `C_new` exactly.
pub fn tracker_update(
    y: &SymMatrix,
    x_old: &DenseMatrix,
    x_new: &DenseMatrix,
    s: &ConstraintSample,
    b: f64,
) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain(format!(
            "tracking weight must lie in [0, 1], got {b}"
        )));
    }
    if x_old.shape() != x_new.shape() || y.dim() != x_new.cols() {
        return Err(Error::dim(
            "tracker_update",
            format!(
                "{:?} iterates and {}x{} tracker",
                x_old.shape(),
                x_old.cols(),
                x_old.cols()
            ),
            format!("{:?} and {}x{}", x_new.shape(), y.dim(), y.dim()),
        ));
    }
    let c_new = c_theta(x_new, s)?;
    if b == 1.0 {
        return Ok(c_new);
    }
    let c_old = c_theta(x_old, s)?;
    Ok(y.sub(&c_old).scale(1.0 - b).add(&c_new))
}

/// `X Y^{-1/2}`.
pub fn postprocess(x: &DenseMatrix, y: &SymMatrix) -> Result<DenseMatrix> {
    if y.dim() != x.cols() {
        return Err(Error::dim(
            "postprocess",
            format!("{0}x{0}", x.cols()),
            format!("{0}x{0}", y.dim()),
        ));
    }
    Ok(x.matmul(spd_inv_sqrt(y)?.as_dense()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaParams {
    eta1: f64,
    eta2: f64,
    eps: f64,
}

impl AdaParams {
    pub fn new(eta1: f64, eta2: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta1) || !(0.0..1.0).contains(&eta2) {
            return Err(Error::Domain(format!(
                "moment weights must lie in [0, 1), got ({eta1}, {eta2})"
            )));
        }
        if eta1 * eta1 >= eta2 {
            return Err(Error::Domain(format!(
                "need eta1^2 < eta2, got eta1 = {eta1}, eta2 = {eta2}"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("eps must be positive, got {eps}")));
        }
        Ok(AdaParams { eta1, eta2, eps })
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Squared step-length bound `alpha^2 n p / ((1 - eta2)(1 - eta1^2 / eta2))`.
    pub fn displacement_bound(&self, alpha: f64, n: usize, p: usize) -> f64 {
        let gamma = self.eta1 * self.eta1 / self.eta2;
        alpha * alpha * (n * p) as f64 / ((1.0 - self.eta2) * (1.0 - gamma))
    }
}

impl Default for AdaParams {
    fn default() -> Self {
        AdaParams {
            eta1: 0.9,
            eta2: 0.999,
            eps: 1e-8,
        }
    }
}

struct Moments {
    b: DenseMatrix,
    v: DenseMatrix,
    vhat: DenseMatrix,
}

fn has_nan(m: &DenseMatrix) -> bool {
    m.as_slice().iter().any(|v| v.is_nan())
}

pub fn cdfsg_run(
    problem: &dyn StochasticProblem,
    x0: &DenseMatrix,
    sched: &StepSchedule,
    params: PenaltyParams,
    seed: u64,
    opts: &RunOptions,
    hook: Option<&mut dyn FnMut(&IterView<'_>)>,
) -> Result<RunOutput> {
    run(problem, x0, sched, params, None, seed, opts, hook)
}

#[allow(clippy::too_many_arguments)]
pub fn cdfsg_ada_run(
    problem: &dyn StochasticProblem,
    x0: &DenseMatrix,
    sched: &StepSchedule,
    params: PenaltyParams,
    ada: AdaParams,
    seed: u64,
    opts: &RunOptions,
    hook: Option<&mut dyn FnMut(&IterView<'_>)>,
) -> Result<RunOutput> {
    run(problem, x0, sched, params, Some(ada), seed, opts, hook)
}

#[allow(clippy::too_many_arguments)]
fn run(
    problem: &dyn StochasticProblem,
    x0: &DenseMatrix,
    sched: &StepSchedule,
    params: PenaltyParams,
    ada: Option<AdaParams>,
    seed: u64,
    opts: &RunOptions,
    mut hook: Option<&mut dyn FnMut(&IterView<'_>)>,
) -> Result<RunOutput> {
    let (n, p) = problem.dims();
    if x0.shape() != (n, p) {
        return Err(Error::dim(
            "initial point",
            format!("{n}x{p}"),
            format!("{}x{}", x0.rows(), x0.cols()),
        ));
    }
    let start = Instant::now();
    let k_total = sched.iterations();
    let alpha = sched.alpha();
    let b = sched.tracking_weight();
    let every = opts.cadence.period(k_total);
    let exact = problem.exact();
    let mut sampler = problem.sampler(seed);

    let mut x = x0.clone();
    let mut y = match (exact, opts.sampled_y0) {
        (Some(e), false) => gram(&x, e.constraint.operator().as_ref())?,
        _ => c_theta(&x, &sampler.draw_constraint()?)?,
    };
    let mut d = DenseMatrix::zeros(n, p);
    let mut moments = ada.map(|_| Moments {
        b: DenseMatrix::zeros(n, p),
        v: DenseMatrix::zeros(n, p),
        vhat: DenseMatrix::zeros(n, p),
    });

    let mut record = RunRecord {
        rows: Vec::with_capacity(k_total + 1),
        summary: RunSummary {
            solver: if ada.is_some() { "cdfsg-ada" } else { "cdfsg" }.into(),
            iterations: k_total,
            alpha,
            tracking_weight: b,
            ..Default::default()
        },
    };
    let bound = ada.map(|a| a.displacement_bound(alpha, n, p) * (1.0 + 1e-12));

    let mut fval = exact
        .map(|e| h_value(&x, e.objective.as_ref(), &e.constraint, params))
        .transpose()?;
    for k in 0..=k_total {
        if k > 0 {
            let x_old = x.clone();
            match (&moments, ada) {
                (Some(m), Some(a)) => {
                    let step =
                        m.b.zip_map(&m.vhat, |bv, vh| alpha * bv / (a.eps() + vh).sqrt());
                    x -= &step;
                    if step.dot(&step) > bound.unwrap() {
                        record.summary.displacement_violations += 1;
                    }
                }
                _ => x.axpy(-alpha, &d),
            }
            let s = sampler.draw_constraint()?;
            y = tracker_update(&y, &x_old, &x, &s, b)?;
            let o = sampler.draw_objective()?;
            d = w_direction(&x, &y, &o, &s, params)?;
            if let (Some(m), Some(a)) = (&mut moments, ada) {
                m.b =
                    m.b.zip_map(&d, |bv, dv| a.eta1() * bv + (1.0 - a.eta1()) * dv);
                m.v = m
                    .vhat
                    .zip_map(&d, |vh, dv| a.eta2() * vh + (1.0 - a.eta2()) * dv * dv);
                let next = m.v.zip_map(&m.vhat, f64::max);
                record.summary.monotonicity_violations += next
                    .as_slice()
                    .iter()
                    .zip(m.vhat.as_slice())
                    .filter(|(a, b)| a < b)
                    .count();
                m.vhat = next;
            }
            fval = match h_xi_value(&x, &y, &o, params) {
                Ok(v) => Some(v),
                Err(Error::Capability(_)) => None,
                Err(e) => return Err(e),
            };
        }

        let mut row = MetricRow {
            iter: k,
            wall_s: start.elapsed().as_secs_f64(),
            fval,
            feas_est: Some(y.affine(1.0, -1.0).norm()),
            dnorm: Some(d.norm()),
            ..Default::default()
        };
        let due = every.is_some_and(|e| k % e == 0 || k == k_total);
        if due {
            if let Some(e) = exact {
                let rep = kkt_residual(&x, e.objective.as_ref(), &e.constraint, params)?;
                row.grad_h = Some(rep.grad_h_norm);
                row.kkt = Some(rep.kkt_norm);
            }
            if let Some(metric) = &opts.metric {
                row.pcc = metric(&x);
            }
        }
        let diverged = has_nan(&x)
            || has_nan(&d)
            || y.as_slice().iter().any(|v| v.is_nan())
            || row
                .fval
                .is_some_and(|f| !(f.abs() <= opts.divergence_limit));
        if let Some(h) = hook.as_deref_mut() {
            h(&IterView {
                k,
                x: &x,
                y: &y,
                d: &d,
                first_moment: moments.as_ref().map(|m| &m.b),
                second_moment: moments.as_ref().map(|m| &m.v),
                max_second_moment: moments.as_ref().map(|m| &m.vhat),
                row: &row,
            });
        }
        record.rows.push(row);
        if diverged {
            record.summary.wall_s = start.elapsed().as_secs_f64();
            return Err(Error::Divergence {
                iteration: k,
                reason: "non-finite iterate or objective estimate beyond the divergence limit"
                    .into(),
                partial: Box::new(record),
            });
        }
    }
    record.summary.wall_s = start.elapsed().as_secs_f64();
    Ok(RunOutput { x, y, record })
}
