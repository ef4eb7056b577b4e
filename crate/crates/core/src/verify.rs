//! Randomized self-checks: finite-difference gradients and Hessians,
//! algebraic identities, unbiasedness of the stochastic direction, tracker
//! identities, the deterministic reduction, the saddle certificate at the
//! origin and the stationarity sandwich near the manifold.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DatasetMatrix;
use crate::error::{Error, Result};
use crate::gcca::{BlockSpec, GccaProblem, Merit};
use crate::linalg::{
    gram, m_orthonormalize, orthonormalize_columns, sym_fn, sym_part, DenseMatrix, DenseOperator,
    SymMatrix,
};
use crate::objective::{
    ConstantConstraint, LogCoshObjective, QuadraticObjective, SmoothObjective, SumObjective,
};
use crate::optim::{
    cdfsg_run, deterministic_gd_run, tracker_update, RunOptions, StepMode, StepSchedule,
};
use crate::oracle::{
    c_theta, w_direction, Batch, BatchOptions, DeterministicProblem, StochasticProblem,
};
use crate::penalty::{
    beta_threshold, h_grad, h_hess_vec, h_value, inner_product_identity_check, kkt_field,
    min_hessian_eigenvalue, PenaltyParams,
};

pub const SUITES: [&str; 8] = [
    "gradient",
    "hessian",
    "identities",
    "unbiasedness",
    "tracker",
    "reduction",
    "saddle",
    "sandwich",
];

/// Deliberate defects for checking that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Flip the sign of the penalty term in the gradient under test.
    PenaltySign,
}

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub seed: u64,
    pub mutation: Option<Mutation>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: 20240601,
            mutation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub cases: usize,
}

pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    orthonormalize_columns(&gaussian(n, n, rng))
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `Q diag(lambda) Q^T` with eigenvalues spread log-uniformly over `[lo, hi]`.
pub fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> SymMatrix {
    let q = random_orthogonal(n, rng);
    let lam: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64
            };
            lo * (hi / lo).powf(t)
        })
        .collect();
    sym_part(
        &q.matmul(&DenseMatrix::from_diag(&lam))
            .matmul(&q.transpose()),
    )
}

fn random_symmetric(n: usize, rng: &mut impl Rng) -> SymMatrix {
    sym_part(&gaussian(n, n, rng))
}

/// Central-difference gradient of `f` at `x` with step `t`.
pub fn fd_gradient(f: impl Fn(&DenseMatrix) -> f64, x: &DenseMatrix, t: f64) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for k in 0..x.as_slice().len() {
        let orig = xp.as_slice()[k];
        xp.as_mut_slice()[k] = orig + t;
        let fp = f(&xp);
        xp.as_mut_slice()[k] = orig - t;
        let fm = f(&xp);
        xp.as_mut_slice()[k] = orig;
        g.as_mut_slice()[k] = (fp - fm) / (2.0 * t);
    }
    g
}

fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

struct Instance {
    obj: Arc<dyn SmoothObjective>,
    cons: ConstantConstraint,
}

fn quadratic_instance(
    n: usize,
    p: usize,
    linear: bool,
    rng: &mut impl Rng,
) -> Result<(QuadraticObjective, ConstantConstraint)> {
    let a = random_symmetric(n, rng);
    let obj = if linear {
        QuadraticObjective::with_linear(a, gaussian(n, p, rng))?
    } else {
        QuadraticObjective::new(a)
    };
    let cons = ConstantConstraint::from_dense(random_spd(n, 0.5, 2.0, rng))?;
    Ok((obj, cons))
}

fn smooth_instance(n: usize, p: usize, rng: &mut impl Rng) -> Result<Instance> {
    let (quad, cons) = quadratic_instance(n, p, true, rng)?;
    let obj: Arc<dyn SmoothObjective> = if rng.random_bool(0.5) {
        Arc::new(quad)
    } else {
        let w = DenseMatrix::from_fn(n, p, |_, _| rng.random_range(0.2..2.0));
        let shift = gaussian(n, p, rng);
        Arc::new(SumObjective(quad, LogCoshObjective::new(w, shift)?))
    };
    Ok(Instance { obj, cons })
}

fn dims(rng: &mut impl Rng) -> (usize, usize) {
    let n = rng.random_range(2..=8);
    let p = rng.random_range(1..=3.min(n));
    (n, p)
}

fn gradient_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, p) = dims(&mut rng);
        let inst = smooth_instance(n, p, &mut rng)?;
        let params = PenaltyParams::new(rng.random_range(0.5..5.0))?;
        let x = gaussian(n, p, &mut rng).scale(0.5);
        let mut g = h_grad(&x, inst.obj.as_ref(), &inst.cons, params)?;
        if opts.mutation == Some(Mutation::PenaltySign) {
            let mx = inst.cons.apply(&x);
            let c = gram(&x, inst.cons.operator().as_ref())?;
            let term = mx.matmul(&c.square().affine(params.beta(), -params.beta()));
            g.axpy(-2.0, &term);
        }
        let fd = fd_gradient(
            |y| h_value(y, inst.obj.as_ref(), &inst.cons, params).unwrap(),
            &x,
            1e-5,
        );
        worst = worst.max(rel(&g, &fd));
    }
    Ok(report("gradient", worst, 1e-6, 100))
}

fn hessian_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4e55);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, p) = dims(&mut rng);
        let (obj, cons) = quadratic_instance(n, p, rng.random_bool(0.5), &mut rng)?;
        let params = PenaltyParams::new(rng.random_range(0.5..5.0))?;
        let x = gaussian(n, p, &mut rng).scale(0.5);
        let d1 = gaussian(n, p, &mut rng);
        let d2 = gaussian(n, p, &mut rng);
        let t = 1e-5;
        let mut xp = x.clone();
        xp.axpy(t, &d1);
        let mut xm = x.clone();
        xm.axpy(-t, &d1);
        let fd =
            (h_grad(&xp, &obj, &cons, params)? - h_grad(&xm, &obj, &cons, params)?).scale(0.5 / t);
        let h1 = h_hess_vec(&x, &d1, &obj, &cons, params)?;
        let h2 = h_hess_vec(&x, &d2, &obj, &cons, params)?;
        worst = worst.max(rel(&h1, &fd) / 1e-5);
        let asym = (d1.dot(&h2) - d2.dot(&h1)).abs() / (1.0 + d1.dot(&h2).abs());
        worst = worst.max(asym / 1e-8);
        let sum = h_hess_vec(&x, &(&d1 + &d2), &obj, &cons, params)?;
        worst = worst.max((sum - (&h1 + &h2)).norm() / (1.0 + h1.norm() + h2.norm()) / 1e-8);
    }
    Ok(report("hessian", worst, 1.0, 50))
}

fn identities_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x1de7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, p) = dims(&mut rng);
        let inst = smooth_instance(n, p, &mut rng)?;
        let params = PenaltyParams::new(rng.random_range(0.5..5.0))?;
        let xf = m_orthonormalize(&gaussian(n, p, &mut rng), inst.cons.operator().as_ref())?;
        let l = kkt_field(&xf, inst.obj.as_ref(), &inst.cons)?;
        let g = h_grad(&xf, inst.obj.as_ref(), &inst.cons, params)?;
        worst = worst.max((&g - &l).norm() / (1e-12 * (1.0 + l.norm())));

        let x = gaussian(n, p, &mut rng).scale(0.6);
        let c = gram(&x, inst.cons.operator().as_ref())?;
        let qs = [SymMatrix::identity(p), c.clone(), c.square().sub(&c)];
        for q in &qs {
            let r = inner_product_identity_check(&x, q, inst.obj.as_ref(), &inst.cons, params)?;
            worst = worst.max(r / 1e-9);
        }
    }
    Ok(report("identities", worst, 1.0, 50))
}

fn unbiasedness_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xb1a5);
    let (n_samples, dims) = (24, (3, 4));
    let views: Vec<DatasetMatrix> = [dims.0, dims.1]
        .iter()
        .map(|&d| DatasetMatrix::new(gaussian(n_samples, d, &mut rng)))
        .collect::<Result<_>>()?;
    let gcca = GccaProblem::new(
        BlockSpec::new(vec![dims.0, dims.1])?,
        None,
        Merit::Identity,
        2,
    )?;
    let problem = crate::gcca::gcca_problem_to_stochastic(
        gcca,
        views,
        BatchOptions {
            batch_size: 1,
            shared: false,
        },
    )?;
    let exact = problem.exact().expect("empirical problems are exact");
    let params = PenaltyParams::new(0.7)?;
    let single = |i: usize| Batch::Indices(vec![i].into());
    let cons: Vec<_> = (0..n_samples)
        .map(|i| problem.constraint_sample(single(i)))
        .collect();
    let objs: Vec<_> = (0..n_samples)
        .map(|i| problem.objective_sample(single(i)))
        .collect();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = gaussian(dims.0 + dims.1, 2, &mut rng).scale(0.5);
        let y = gram(&x, exact.constraint.operator().as_ref())?;
        let mut avg = DenseMatrix::zeros(x.rows(), x.cols());
        for o in &objs {
            for s in &cons {
                avg += &w_direction(&x, &y, o, s, params)?;
            }
        }
        let avg = avg.scale(1.0 / (n_samples * n_samples) as f64);
        let g = h_grad(&x, exact.objective.as_ref(), &exact.constraint, params)?;
        worst = worst.max(rel(&avg, &g) / 1e-10);
    }
    Ok(report("unbiasedness", worst, 1.0, 20))
}

fn deterministic_quadratic(
    n: usize,
    rng: &mut impl Rng,
) -> Result<(Arc<QuadraticObjective>, ConstantConstraint)> {
    let a = random_spd(n, 1.0, 3.0, rng);
    let obj = Arc::new(QuadraticObjective::new(a));
    let cons = ConstantConstraint::from_dense(random_spd(n, 0.8, 1.2, rng))?;
    Ok((obj, cons))
}

fn tracker_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7ac4);
    let (obj, cons) = deterministic_quadratic(6, &mut rng)?;
    let problem = DeterministicProblem::new(obj, cons.clone(), 2);
    let x0 = gaussian(6, 2, &mut rng).scale(0.4);
    let mut worst: f64 = 0.0;

    let mut sampler = problem.sampler(0);
    let s = sampler.draw_constraint()?;
    let x1 = gaussian(6, 2, &mut rng);
    let y = random_symmetric(2, &mut rng);
    let collapsed = tracker_update(&y, &x0, &x1, &s, 1.0)?;
    if collapsed != c_theta(&x1, &s)? {
        worst = f64::INFINITY;
    }

    let sched = StepSchedule::new(0.5, 0.01, 50, StepMode::Constant)?;
    let mut hook = |v: &crate::optim::IterView<'_>| {
        let c = gram(v.x, cons.operator().as_ref()).unwrap();
        worst = worst.max(v.y.sub(&c).norm() / 1e-12);
    };
    cdfsg_run(
        &problem,
        &x0,
        &sched,
        PenaltyParams::new(1.0)?,
        0,
        &RunOptions::default(),
        Some(&mut hook),
    )?;
    Ok(report("tracker", worst, 1.0, 51))
}

fn reduction_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4ed0);
    let (obj, cons) = deterministic_quadratic(6, &mut rng)?;
    let params = PenaltyParams::new(1.0)?;
    let problem = DeterministicProblem::new(obj.clone(), cons.clone(), 2);
    let x0 = gaussian(6, 2, &mut rng).scale(0.4);
    let steps = 40;
    let alpha = 0.01;
    let sched = StepSchedule::new(alpha, alpha, steps + 1, StepMode::Constant)?;
    let mut worst: f64 = 0.0;
    let mut xs = Vec::new();
    let mut hook = |v: &crate::optim::IterView<'_>| {
        if v.k > 0 {
            let g = h_grad(v.x, obj.as_ref(), &cons, params).unwrap();
            worst = worst.max((v.d - &g).max_abs() / 1e-12);
        }
        xs.push(v.x.clone());
    };
    cdfsg_run(
        &problem,
        &x0,
        &sched,
        params,
        0,
        &RunOptions::default(),
        Some(&mut hook),
    )?;
    let mut gd_xs = Vec::new();
    let mut x = x0.clone();
    gd_xs.push(x.clone());
    for _ in 0..steps {
        let (next, rec) = deterministic_gd_run(
            obj.as_ref(),
            &cons,
            &x,
            alpha,
            1,
            params,
            &RunOptions::default(),
        )?;
        if rec.summary.step_halvings > 0 {
            worst = f64::INFINITY;
        }
        x = next;
        gd_xs.push(x.clone());
    }
    // the tracking method idles for one step since its first direction is zero
    for (k, gx) in gd_xs.iter().enumerate() {
        if xs[k + 1] != *gx {
            worst = f64::INFINITY;
        }
    }
    Ok(report("reduction", worst, 1.0, steps))
}

fn saddle_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5add);
    let (n, p) = (6, 2);
    let obj = QuadraticObjective::new(random_spd(n, 0.5, 2.0, &mut rng));
    let cons = ConstantConstraint::from_dense(random_spd(n, 0.7, 1.5, &mut rng))?;
    let beta = beta_threshold(
        p,
        obj.lipschitz(),
        obj.grad_norm_at_zero(),
        cons.sigma_min(),
        cons.sigma_max(),
    )?;
    let params = PenaltyParams::new(beta)?;
    let start = gaussian(n, p, &mut rng);
    let (lam, _) = min_hessian_eigenvalue(
        &DenseMatrix::zeros(n, p),
        &obj,
        &cons,
        params,
        &start,
        1e-6,
        20000,
    )?;
    let bound = -beta * cons.sigma_min() / 4.0 + 1e-3;
    // residual > 1 means the certificate failed
    let residual = if lam <= bound {
        0.0
    } else {
        1.0 + (lam - bound)
    };
    Ok(report("saddle", residual, 1.0, 1))
}

fn sandwich_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5a4d);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..50 {
        let (n, p) = dims(&mut rng);
        let m = random_spd(n, 0.6, 1.5, &mut rng);
        let cons = ConstantConstraint::from_dense(m.clone())?;
        let obj = QuadraticObjective::with_linear(
            random_symmetric(n, &mut rng),
            gaussian(n, p, &mut rng).scale(0.3),
        )?;
        let beta = beta_threshold(
            p,
            obj.lipschitz(),
            obj.grad_norm_at_zero(),
            cons.sigma_min(),
            cons.sigma_max(),
        )?;
        let params = PenaltyParams::new(beta)?;
        let xf = m_orthonormalize(&gaussian(n, p, &mut rng), &DenseOperator(m.into_dense()))?;
        let e = random_symmetric(p, &mut rng);
        let e = e.scale(rng.random_range(0.0..1.0 / 6.0) / e.norm().max(1e-12));
        let x = xf.matmul(sym_fn(&e.affine(1.0, 1.0), f64::sqrt).as_dense());
        let c = gram(&x, cons.operator().as_ref())?;
        let dev = c.affine(1.0, -1.0).norm();
        if dev > 1.0 / 6.0 {
            continue;
        }
        cases += 1;
        let l = kkt_field(&x, &obj, &cons)?.norm();
        let g = h_grad(&x, &obj, &cons, params)?.norm();
        let upper = l + 7.0 * beta * cons.sigma_max().sqrt() * dev;
        let lower =
            l / (2.0 * cons.condition_number().sqrt()) + cons.sigma_min().sqrt() * beta / 4.0 * dev;
        // ratios above 1 are violations
        worst = worst.max(g / upper).max(lower / g.max(1e-300));
    }
    Ok(report("sandwich", worst, 1.0 + 1e-9, cases))
}

fn report(name: &'static str, max_residual: f64, tolerance: f64, cases: usize) -> SuiteReport {
    SuiteReport {
        name,
        passed: max_residual.is_finite() && max_residual < tolerance,
        max_residual,
        tolerance,
        cases,
    }
}

/// Runs one named suite.
pub fn run_suite(name: &str, opts: &CheckOptions) -> Result<SuiteReport> {
    match name {
        "gradient" => gradient_suite(opts),
        "hessian" => hessian_suite(opts),
        "identities" => identities_suite(opts),
        "unbiasedness" => unbiasedness_suite(opts),
        "tracker" => tracker_suite(opts),
        "reduction" => reduction_suite(opts),
        "saddle" => saddle_suite(opts),
        "sandwich" => sandwich_suite(opts),
        other => Err(Error::Domain(format!(
            "unknown suite {other:?}; expected one of {SUITES:?}"
        ))),
    }
}

pub fn run_all(opts: &CheckOptions) -> Result<Vec<SuiteReport>> {
    SUITES.iter().map(|s| run_suite(s, opts)).collect()
}
