use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{gram, DenseMatrix};
use crate::objective::{ConstantConstraint, SmoothObjective};
use crate::penalty::{h_grad, h_value, kkt_field, PenaltyParams};

use super::{MetricRow, RunOptions, RunRecord, RunSummary};

const MAX_HALVINGS: usize = 60;
/// Relative round-off allowance when comparing penalty values.
pub const DESCENT_SLACK: f64 = 1e-13;

/// Full-batch gradient descent on the penalty, `X <- X - step * grad h(X)`.
/// A step that increases `h` beyond round-off is halved (and the smaller step kept) until it
/// does not.
#[allow(clippy::too_many_arguments)]
pub fn deterministic_gd_run(
    obj: &dyn SmoothObjective,
    cons: &ConstantConstraint,
    x0: &DenseMatrix,
    step: f64,
    iterations: usize,
    params: PenaltyParams,
    opts: &RunOptions,
) -> Result<(DenseMatrix, RunRecord)> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let start = Instant::now();
    let every = opts.cadence.period(iterations);
    let mut step = step;
    let mut x = x0.clone();
    let mut h = h_value(&x, obj, cons, params)?;
    let mut g = h_grad(&x, obj, cons, params)?;
    let mut record = RunRecord {
        rows: Vec::with_capacity(iterations + 1),
        summary: RunSummary {
            solver: "det-gd".into(),
            iterations,
            alpha: step,
            tracking_weight: 1.0,
            ..Default::default()
        },
    };
    for k in 0..=iterations {
        if k > 0 {
            let mut halvings = 0;
            loop {
                let mut cand = x.clone();
                cand.axpy(-step, &g);
                let h_cand = h_value(&cand, obj, cons, params)?;
                if h_cand <= h + DESCENT_SLACK * (1.0 + h.abs())
                    || halvings == MAX_HALVINGS
                    || h_cand.is_nan()
                {
                    x = cand;
                    h = h_cand;
                    break;
                }
                step *= 0.5;
                halvings += 1;
            }
            record.summary.step_halvings += halvings;
            g = h_grad(&x, obj, cons, params)?;
        }
        let c = gram(&x, cons.operator().as_ref())?;
        let mut row = MetricRow {
            iter: k,
            wall_s: start.elapsed().as_secs_f64(),
            fval: Some(h),
            feas_est: Some(c.affine(1.0, -1.0).norm()),
            dnorm: Some(g.norm()),
            grad_h: Some(g.norm()),
            ..Default::default()
        };
        if every.is_some_and(|e| k % e == 0 || k == iterations) {
            row.kkt = Some(kkt_field(&x, obj, cons)?.norm());
            if let Some(metric) = &opts.metric {
                row.pcc = metric(&x);
            }
        }
        let diverged = !h.is_finite()
            || h.abs() > opts.divergence_limit
            || g.as_slice().iter().any(|v| v.is_nan());
        record.rows.push(row);
        if diverged {
            record.summary.wall_s = start.elapsed().as_secs_f64();
            return Err(Error::Divergence {
                iteration: k,
                reason: "non-finite penalty value or value beyond the divergence limit".into(),
                partial: Box::new(record),
            });
        }
    }
    record.summary.alpha = step;
    record.summary.wall_s = start.elapsed().as_secs_f64();
    Ok((x, record))
}
