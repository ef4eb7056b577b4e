//! Generalized canonical correlation analysis on top of the stochastic
//! problem interface: merit functions, minibatch objectives, ground truth
//! and correlation metrics.

use std::sync::Arc;

use nalgebra::SVD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{standardize, DatasetMatrix};
use crate::error::{Error, Result};
use crate::linalg::{
    orthonormalize_columns, spd_inv_sqrt, sym_eig, sym_part, DenseMatrix, SymMatrix,
};
use crate::objective::SmoothObjective;
use crate::oracle::{
    empirical_problem_from_data, Batch, BatchObjective, BatchOptions, BlockData, EmpiricalProblem,
    SampleObjective,
};

/// Sizes `n_i` of the views; the decision variable stacks the view blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    dims: Vec<usize>,
}

impl BlockSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Domain(format!(
                "block sizes must be a nonempty list of positive counts, got {dims:?}"
            )));
        }
        Ok(BlockSpec { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn m(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for d in &self.dims {
            out.push(out.last().unwrap() + d);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Merit {
    Identity,
    Huber { mu: f64 },
}

impl Merit {
    pub fn huber(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Domain(format!(
                "Huber threshold must be positive, got {mu}"
            )));
        }
        Ok(Merit::Huber { mu })
    }

    fn curvature(self, t: f64) -> f64 {
        match self {
            Merit::Identity => 0.0,
            Merit::Huber { mu } => {
                if t.abs() <= mu {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub const DEFAULT_HUBER_MU: f64 = 1.0;

/// `(g(t), g'(t))`.
pub fn merit_value_and_slope(t: f64, merit: Merit) -> (f64, f64) {
    match merit {
        Merit::Identity => (t, 1.0),
        Merit::Huber { mu } => {
            if t.abs() <= mu {
                (0.5 * t * t, t)
            } else {
                (mu * (t.abs() - 0.5 * mu), mu * t.signum())
            }
        }
    }
}

/// `min -sum_r sum_{i != j} c_ij g(X_r^[i]^T Sigma_ij X_r^[j])` subject to
/// `sum_i X^[i]^T Sigma_ii X^[i] = I_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct GccaProblem {
    blocks: BlockSpec,
    weights: Vec<Vec<f64>>,
    merit: Merit,
    p: usize,
}

impl GccaProblem {
    /// Uses `c_ij = 1/2` for all `i != j` when `weights` is `None`.
    pub fn new(
        blocks: BlockSpec,
        weights: Option<Vec<Vec<f64>>>,
        merit: Merit,
        p: usize,
    ) -> Result<Self> {
        let m = blocks.m();
        if m < 2 {
            return Err(Error::Domain(format!(
                "GCCA needs at least two views, got {m}"
            )));
        }
        if p == 0 || blocks.dims().iter().any(|&d| d < p) {
            return Err(Error::Domain(format!(
                "p = {p} must be positive and at most every view size {:?}",
                blocks.dims()
            )));
        }
        let weights = match weights {
            None => (0..m)
                .map(|i| (0..m).map(|j| if i == j { 0.0 } else { 0.5 }).collect())
                .collect(),
            Some(w) => {
                if w.len() != m || w.iter().any(|r| r.len() != m) {
                    return Err(Error::dim(
                        "GccaProblem weights",
                        format!("{m}x{m}"),
                        "ragged",
                    ));
                }
                for i in 0..m {
                    if w[i][i] != 0.0 {
                        return Err(Error::Domain("weights need a zero diagonal".into()));
                    }
                    for j in 0..m {
                        if !(w[i][j] >= 0.0) || w[i][j] != w[j][i] {
                            return Err(Error::Domain(format!(
                                "weights must be symmetric and nonnegative, bad entry ({i}, {j})"
                            )));
                        }
                    }
                }
                w
            }
        };
        Ok(GccaProblem {
            blocks,
            weights,
            merit,
            p,
        })
    }

    pub fn blocks(&self) -> &BlockSpec {
        &self.blocks
    }

    pub fn merit(&self) -> Merit {
        self.merit
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    fn check(&self, x: &DenseMatrix, data: &BlockData) -> Result<()> {
        if data.block_dims() != self.blocks.dims() {
            return Err(Error::dim(
                "gcca blocks",
                format!("{:?}", self.blocks.dims()),
                format!("{:?}", data.block_dims()),
            ));
        }
        if x.shape() != (self.blocks.total(), self.p) {
            return Err(Error::dim(
                "gcca point",
                format!("{}x{}", self.blocks.total(), self.p),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        Ok(())
    }

    /// Per-view slabs `Z_i[batch] X^[i]` and the column scores `s_ijr`.
    fn scores(
        &self,
        x: &DenseMatrix,
        data: &BlockData,
        batch: &Batch,
    ) -> (Vec<DenseMatrix>, Scores) {
        let m = self.blocks.m();
        let l = batch.len(data.n_samples()) as f64;
        let slabs: Vec<DenseMatrix> = (0..m)
            .map(|i| data.project(i, batch, &data.x_block(x, i)))
            .collect();
        let mut s = vec![vec![vec![0.0; self.p]; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                for r in 0..self.p {
                    let v: f64 = (0..slabs[i].rows())
                        .map(|t| slabs[i][(t, r)] * slabs[j][(t, r)])
                        .sum::<f64>()
                        / l;
                    s[i][j][r] = v;
                    s[j][i][r] = v;
                }
            }
        }
        (slabs, s)
    }

    fn evaluate(
        &self,
        x: &DenseMatrix,
        data: &BlockData,
        batch: &Batch,
        want_grad: bool,
    ) -> (f64, Option<DenseMatrix>) {
        let m = self.blocks.m();
        let (slabs, s) = self.scores(x, data, batch);
        let mut value = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j && self.weights[i][j] != 0.0 {
                    for r in 0..self.p {
                        value -=
                            self.weights[i][j] * merit_value_and_slope(s[i][j][r], self.merit).0;
                    }
                }
            }
        }
        if !want_grad {
            return (value, None);
        }
        let l = batch.len(data.n_samples()) as f64;
        let mut grad = DenseMatrix::zeros(x.rows(), x.cols());
        for i in 0..m {
            let mut acc = DenseMatrix::zeros(slabs[i].rows(), self.p);
            for j in 0..m {
                let w = self.weights[i][j] + self.weights[j][i];
                if i == j || w == 0.0 {
                    continue;
                }
                let slope: Vec<f64> = (0..self.p)
                    .map(|r| w * merit_value_and_slope(s[i][j][r], self.merit).1)
                    .collect();
                for t in 0..acc.rows() {
                    for (r, a) in acc.row_mut(t).iter_mut().enumerate() {
                        *a += slope[r] * slabs[j][(t, r)];
                    }
                }
            }
            let gi = data.back_project(i, batch, &acc).scale(-1.0 / l);
            grad.set_row_block(data.offset(i), &gi);
        }
        (value, Some(grad))
    }

    fn hess_vec(
        &self,
        x: &DenseMatrix,
        d: &DenseMatrix,
        data: &BlockData,
        batch: &Batch,
    ) -> DenseMatrix {
        let m = self.blocks.m();
        let l = batch.len(data.n_samples()) as f64;
        let (slabs, s) = self.scores(x, data, batch);
        let dslabs: Vec<DenseMatrix> = (0..m)
            .map(|i| data.project(i, batch, &data.x_block(d, i)))
            .collect();
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for i in 0..m {
            let rows = slabs[i].rows();
            let mut acc = DenseMatrix::zeros(rows, self.p);
            for j in 0..m {
                let w = self.weights[i][j] + self.weights[j][i];
                if i == j || w == 0.0 {
                    continue;
                }
                for r in 0..self.p {
                    let slope = merit_value_and_slope(s[i][j][r], self.merit).1;
                    let curv = self.merit.curvature(s[i][j][r]);
                    let ds = if curv != 0.0 {
                        (0..rows)
                            .map(|t| {
                                dslabs[i][(t, r)] * slabs[j][(t, r)]
                                    + slabs[i][(t, r)] * dslabs[j][(t, r)]
                            })
                            .sum::<f64>()
                            / l
                    } else {
                        0.0
                    };
                    for t in 0..rows {
                        acc[(t, r)] +=
                            w * (slope * dslabs[j][(t, r)] + curv * ds * slabs[j][(t, r)]);
                    }
                }
            }
            let hi = data.back_project(i, batch, &acc).scale(-1.0 / l);
            out.set_row_block(data.offset(i), &hi);
        }
        out
    }
}

type Scores = Vec<Vec<Vec<f64>>>;

/// Value and gradient of the GCCA objective with the moments of one batch.
pub fn gcca_objective_sample(
    x: &DenseMatrix,
    data: &BlockData,
    batch: &Batch,
    problem: &GccaProblem,
) -> Result<(f64, DenseMatrix)> {
    problem.check(x, data)?;
    let (v, g) = problem.evaluate(x, data, batch, true);
    Ok((v, g.unwrap()))
}

/// The GCCA objective restricted to one batch of one dataset.
#[derive(Clone)]
pub struct GccaBatch {
    problem: Arc<GccaProblem>,
    data: Arc<BlockData>,
    batch: Batch,
}

impl GccaBatch {
    pub fn new(problem: Arc<GccaProblem>, data: Arc<BlockData>, batch: Batch) -> Result<Self> {
        problem.check(
            &DenseMatrix::zeros(problem.blocks.total(), problem.p),
            &data,
        )?;
        Ok(GccaBatch {
            problem,
            data,
            batch,
        })
    }
}

impl SmoothObjective for GccaBatch {
    fn value(&self, x: &DenseMatrix) -> f64 {
        self.problem.evaluate(x, &self.data, &self.batch, false).0
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        self.problem
            .evaluate(x, &self.data, &self.batch, true)
            .1
            .unwrap()
    }

    fn hess_vec(&self, x: &DenseMatrix, d: &DenseMatrix) -> Option<DenseMatrix> {
        Some(self.problem.hess_vec(x, d, &self.data, &self.batch))
    }
}

impl SampleObjective for GccaBatch {
    fn grad(&self, x: &DenseMatrix) -> DenseMatrix {
        SmoothObjective::gradient(self, x)
    }

    fn value(&self, x: &DenseMatrix) -> Option<f64> {
        Some(SmoothObjective::value(self, x))
    }
}

impl BatchObjective for Arc<GccaProblem> {
    fn sample(&self, data: &Arc<BlockData>, batch: Batch) -> Arc<dyn SampleObjective> {
        Arc::new(GccaBatch {
            problem: self.clone(),
            data: data.clone(),
            batch,
        })
    }

    fn exact(&self, data: &Arc<BlockData>) -> Arc<dyn SmoothObjective> {
        Arc::new(GccaBatch {
            problem: self.clone(),
            data: data.clone(),
            batch: Batch::All,
        })
    }
}

/// Minibatch GCCA problem: block-diagonal second-moment constraint draws and
/// plug-in objective draws over the same or independent batches.
pub fn gcca_problem_to_stochastic(
    problem: GccaProblem,
    blocks: Vec<DatasetMatrix>,
    options: BatchOptions,
) -> Result<EmpiricalProblem> {
    let dims: Vec<usize> = blocks.iter().map(DatasetMatrix::features).collect();
    if dims != problem.blocks.dims() {
        return Err(Error::dim(
            "gcca_problem_to_stochastic",
            format!("{:?}", problem.blocks.dims()),
            format!("{dims:?}"),
        ));
    }
    let p = problem.p;
    empirical_problem_from_data(blocks, Arc::new(Arc::new(problem)), p, options)
}

/// Reference CCA solution: stacked `[X1; X2]` with `X_i^T Sigma_ii X_i = I_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub xbar: DenseMatrix,
    pub tcc_ref: f64,
    pub canonical_correlations: Vec<f64>,
}

/// Top-`p` canonical pairs from the whitened cross-covariance.
pub fn cca_ground_truth(
    cov11: &SymMatrix,
    cov22: &SymMatrix,
    cov12: &DenseMatrix,
    p: usize,
) -> Result<GroundTruth> {
    let (n1, n2) = (cov11.dim(), cov22.dim());
    if cov12.shape() != (n1, n2) {
        return Err(Error::dim(
            "cca_ground_truth",
            format!("{n1}x{n2}"),
            format!("{}x{}", cov12.rows(), cov12.cols()),
        ));
    }
    if p == 0 || p > n1.min(n2) {
        return Err(Error::Domain(format!(
            "p = {p} outside [1, {}]",
            n1.min(n2)
        )));
    }
    let w1 = spd_inv_sqrt(cov11)?;
    let w2 = spd_inv_sqrt(cov22)?;
    let k = w1.matmul(cov12).matmul(&w2);
    let svd = SVD::new(k.to_nalgebra(), true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let order = &order[..p];
    let up = DenseMatrix::from_fn(n1, p, |i, r| u[(i, order[r])]);
    let vp = DenseMatrix::from_fn(n2, p, |i, r| vt[(order[r], i)]);
    let corr: Vec<f64> = order.iter().map(|&r| svd.singular_values[r]).collect();
    let mut xbar = DenseMatrix::zeros(n1 + n2, p);
    xbar.set_row_block(0, &w1.matmul(&up));
    xbar.set_row_block(n1, &w2.matmul(&vp));
    Ok(GroundTruth {
        xbar,
        tcc_ref: corr.iter().sum(),
        canonical_correlations: corr,
    })
}

/// Ground truth from the full-sample moments of two-view data.
pub fn sample_ground_truth(data: &BlockData, p: usize) -> Result<GroundTruth> {
    if data.n_blocks() != 2 {
        return Err(Error::Domain(format!(
            "CCA ground truth needs two views, got {}",
            data.n_blocks()
        )));
    }
    cca_ground_truth(
        &sym_part(&data.block_covariance(0, 0)),
        &sym_part(&data.block_covariance(1, 1)),
        &data.block_covariance(0, 1),
        p,
    )
}

const RANK_TOL: f64 = 1e-12;

/// Canonical correlations between two projected views given their `p x p`
/// Gram blocks `P1^T P1`, `P2^T P2` and `P1^T P2` (any common scaling).
pub fn canonical_correlations_from_grams(
    g11: &SymMatrix,
    g22: &SymMatrix,
    g12: &DenseMatrix,
) -> Result<Vec<f64>> {
    for g in [g11, g22] {
        let (ev, _) = sym_eig(g);
        let (lo, hi) = (ev[0], *ev.last().unwrap());
        if !(hi > 0.0) || lo <= RANK_TOL * hi {
            return Err(Error::RankDeficient {
                what: "projected view",
                min_eig: lo,
                max_eig: hi,
            });
        }
    }
    let k = spd_inv_sqrt(g11)?
        .matmul(g12)
        .matmul(spd_inv_sqrt(g22)?.as_dense());
    let (ev, _) = sym_eig(&sym_part(&k.t_matmul(&k)));
    let mut out: Vec<f64> = ev.into_iter().rev().map(|v| v.max(0.0).sqrt()).collect();
    out.truncate(g11.dim().min(g22.dim()));
    Ok(out)
}

/// Total correlations captured by the two views of `x` on `data`.
pub fn tcc(x: &DenseMatrix, data: &BlockData) -> Result<f64> {
    if data.n_blocks() != 2 {
        return Err(Error::Domain("TCC needs two views".into()));
    }
    if x.rows() != data.total_dim() {
        return Err(Error::dim(
            "tcc",
            format!("{} rows", data.total_dim()),
            format!("{} rows", x.rows()),
        ));
    }
    let p1 = data.project(0, &Batch::All, &data.x_block(x, 0));
    let p2 = data.project(1, &Batch::All, &data.x_block(x, 1));
    let cc = canonical_correlations_from_grams(
        &sym_part(&p1.t_matmul(&p1)),
        &sym_part(&p2.t_matmul(&p2)),
        &p1.t_matmul(&p2),
    )?;
    Ok(cc.iter().sum())
}

/// Total correlations captured under population covariances.
pub fn tcc_population(
    x: &DenseMatrix,
    cov11: &SymMatrix,
    cov22: &SymMatrix,
    cov12: &DenseMatrix,
) -> Result<f64> {
    let n1 = cov11.dim();
    let x1 = x.row_block(0, n1);
    let x2 = x.row_block(n1, cov22.dim());
    let cc = canonical_correlations_from_grams(
        &sym_part(&x1.t_matmul(&cov11.matmul(&x1))),
        &sym_part(&x2.t_matmul(&cov22.matmul(&x2))),
        &x1.t_matmul(&cov12.matmul(&x2)),
    )?;
    Ok(cc.iter().sum())
}

/// `TCC(X) / TCC(Xbar)` on the given data. Not clamped.
pub fn pcc(x: &DenseMatrix, data: &BlockData, truth: &GroundTruth) -> Result<f64> {
    Ok(tcc(x, data)? / tcc(&truth.xbar, data)?)
}

pub fn pcc_population(
    x: &DenseMatrix,
    cov11: &SymMatrix,
    cov22: &SymMatrix,
    cov12: &DenseMatrix,
    truth: &GroundTruth,
) -> Result<f64> {
    Ok(tcc_population(x, cov11, cov22, cov12)? / tcc_population(&truth.xbar, cov11, cov22, cov12)?)
}

/// Planted two-view Gaussian model.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub dims: (usize, usize),
    pub correlations: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Generated data with its population and full-sample references.
pub struct SyntheticCca {
    /// Centered view matrices, `N x n_1` and `N x n_2`.
    pub views: Vec<DatasetMatrix>,
    pub cov11: SymMatrix,
    pub cov22: SymMatrix,
    pub cov12: DenseMatrix,
    pub population_truth: GroundTruth,
    pub sample_truth: GroundTruth,
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = DenseMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    orthonormalize_columns(&g)
}

/// Views `x_1 = Q_1 z`, `x_2 = Q_2 u` where `u_k = rho_k z_k + sqrt(1 - rho_k^2) w_k`
/// for planted `k` and `u_k = w_k` otherwise; `z`, `w` standard normal and
/// `Q_i` random orthogonal. Canonical directions are the leading columns of
/// `Q_i`, canonical correlations `rho`.
pub fn synthetic_cca(spec: &SyntheticSpec) -> Result<SyntheticCca> {
    let (n1, n2) = spec.dims;
    let p = spec.correlations.len();
    if p == 0 || p > n1.min(n2) {
        return Err(Error::Domain(format!(
            "need 1 <= #correlations <= min(n1, n2), got {p} for dims ({n1}, {n2})"
        )));
    }
    if let Some(r) = spec.correlations.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::Domain(format!(
            "planted correlation {r} outside [0, 1)"
        )));
    }
    if spec.n_samples < 2 {
        return Err(Error::Domain(format!(
            "need at least two samples, got {}",
            spec.n_samples
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let q1 = random_orthogonal(n1, &mut rng);
    let q2 = random_orthogonal(n2, &mut rng);
    let rho = &spec.correlations;

    let mut u1 = DenseMatrix::zeros(spec.n_samples, n1);
    let mut u2 = DenseMatrix::zeros(spec.n_samples, n2);
    for t in 0..spec.n_samples {
        for k in 0..n1 {
            u1[(t, k)] = StandardNormal.sample(&mut rng);
        }
        for k in 0..n2 {
            let w: f64 = StandardNormal.sample(&mut rng);
            u2[(t, k)] = if k < p {
                rho[k] * u1[(t, k)] + (1.0 - rho[k] * rho[k]).sqrt() * w
            } else {
                w
            };
        }
    }
    let z1 = u1.matmul(&q1.transpose());
    let z2 = u2.matmul(&q2.transpose());
    let views = vec![
        standardize(&DatasetMatrix::new(z1)?, true, false)?,
        standardize(&DatasetMatrix::new(z2)?, true, false)?,
    ];

    let mut planted = DenseMatrix::zeros(n1, n2);
    for (k, &r) in rho.iter().enumerate() {
        planted[(k, k)] = r;
    }
    let cov12 = q1.matmul(&planted).matmul(&q2.transpose());
    let mut xbar = DenseMatrix::zeros(n1 + n2, p);
    xbar.set_row_block(0, &DenseMatrix::from_fn(n1, p, |i, r| q1[(i, r)]));
    xbar.set_row_block(n1, &DenseMatrix::from_fn(n2, p, |i, r| q2[(i, r)]));
    let population_truth = GroundTruth {
        xbar,
        tcc_ref: rho.iter().sum(),
        canonical_correlations: rho.clone(),
    };
    let data = BlockData::new(views.clone())?;
    let sample_truth = sample_ground_truth(&data, p)?;
    Ok(SyntheticCca {
        views,
        cov11: SymMatrix::identity(n1),
        cov22: SymMatrix::identity(n2),
        cov12,
        population_truth,
        sample_truth,
    })
}

/// Synthetic CCA as a minibatch stochastic problem (identity merit,
/// `c_12 = c_21 = 1/2`), with its population ground truth.
pub fn synthetic_gaussian_problem(
    spec: &SyntheticSpec,
    merit: Merit,
    options: BatchOptions,
) -> Result<(EmpiricalProblem, SyntheticCca)> {
    let synth = synthetic_cca(spec)?;
    let problem = GccaProblem::new(
        BlockSpec::new(vec![spec.dims.0, spec.dims.1])?,
        None,
        merit,
        spec.correlations.len(),
    )?;
    let stochastic = gcca_problem_to_stochastic(problem, synth.views.clone(), options)?;
    Ok((stochastic, synth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_pieces() {
        let h = Merit::huber(1.0).unwrap();
        assert_eq!(merit_value_and_slope(0.0, h), (0.0, 0.0));
        assert_eq!(merit_value_and_slope(1.0, h), (0.5, 1.0));
        assert_eq!(merit_value_and_slope(2.0, h), (1.5, 1.0));
        assert_eq!(merit_value_and_slope(-2.0, h), (1.5, -1.0));
        assert_eq!(merit_value_and_slope(3.0, Merit::Identity), (3.0, 1.0));
        assert!(Merit::huber(0.0).is_err());
        // both branches agree at the threshold
        let mu: f64 = 0.7;
        let outer = (mu * (mu - 0.5 * mu), mu);
        let inner = (0.5 * mu * mu, mu);
        assert!((outer.0 - inner.0).abs() < 1e-16 && outer.1 == inner.1);
    }

    #[test]
    fn weights_validation() {
        let spec = BlockSpec::new(vec![2, 2, 2]).unwrap();
        assert!(GccaProblem::new(spec.clone(), None, Merit::Identity, 1).is_ok());
        let asym = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ];
        assert!(GccaProblem::new(spec.clone(), Some(asym), Merit::Identity, 1).is_err());
        assert!(
            GccaProblem::new(BlockSpec::new(vec![3]).unwrap(), None, Merit::Identity, 1).is_err()
        );
        assert!(GccaProblem::new(spec, None, Merit::Identity, 3).is_err());
    }

    #[test]
    fn zero_cross_covariance() {
        let gt = cca_ground_truth(
            &SymMatrix::identity(3),
            &SymMatrix::identity(3),
            &DenseMatrix::zeros(3, 3),
            2,
        )
        .unwrap();
        assert_eq!(gt.canonical_correlations, vec![0.0, 0.0]);
        assert_eq!(gt.tcc_ref, 0.0);
    }

    #[test]
    fn invalid_rho_rejected() {
        let spec = SyntheticSpec {
            dims: (3, 3),
            correlations: vec![1.0],
            n_samples: 10,
            seed: 0,
        };
        assert!(synthetic_cca(&spec).is_err());
    }
}
