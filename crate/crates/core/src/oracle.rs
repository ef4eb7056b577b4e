//! Sampling interfaces for the random objective and the random constraint
//! matrix, the auxiliary functions built on single draws, and empirical
//! problems over finite multi-block data.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{BatchIterator, DatasetMatrix};
use crate::error::{Error, Result};
use crate::linalg::{
    constraint_dissolving_op, gram_with, sym_eig, sym_part, DenseMatrix, LinearOperator, SymMatrix,
    SYM_EIG_MAX_DIM,
};
use crate::objective::{ConstantConstraint, SmoothObjective};
use crate::penalty::{direction_kernel, penalty_trace, PenaltyParams};

/// A single-draw objective `f_xi`.
pub trait SampleObjective: Send + Sync {
    fn grad(&self, x: &DenseMatrix) -> DenseMatrix;

    fn value(&self, _x: &DenseMatrix) -> Option<f64> {
        None
    }
}

/// Adapter presenting an exact objective as a (degenerate) sample.
pub struct ExactSample(pub Arc<dyn SmoothObjective>);

impl SampleObjective for ExactSample {
    fn grad(&self, x: &DenseMatrix) -> DenseMatrix {
        self.0.gradient(x)
    }

    fn value(&self, x: &DenseMatrix) -> Option<f64> {
        Some(self.0.value(x))
    }
}

/// One draw of `M_theta`, as a self-adjoint PSD action on `n x p` matrices.
#[derive(Clone)]
pub struct ConstraintSample {
    op: Arc<dyn LinearOperator>,
    pub descriptor: String,
}

impl ConstraintSample {
    pub fn new(op: Arc<dyn LinearOperator>, descriptor: impl Into<String>) -> Self {
        ConstraintSample {
            op,
            descriptor: descriptor.into(),
        }
    }

    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        self.op.apply(x)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// One draw of `f_xi`.
#[derive(Clone)]
pub struct ObjectiveSample {
    f: Arc<dyn SampleObjective>,
    pub descriptor: String,
}

impl ObjectiveSample {
    pub fn new(f: Arc<dyn SampleObjective>, descriptor: impl Into<String>) -> Self {
        ObjectiveSample {
            f,
            descriptor: descriptor.into(),
        }
    }

    pub fn grad(&self, x: &DenseMatrix) -> DenseMatrix {
        self.f.grad(x)
    }

    pub fn value(&self, x: &DenseMatrix) -> Option<f64> {
        self.f.value(x)
    }
}

/// Full-expectation operators of a problem.
#[derive(Clone)]
pub struct ExactProblem {
    pub objective: Arc<dyn SmoothObjective>,
    pub constraint: ConstantConstraint,
}

/// A stream of draws. Each optimizer run owns one sampler.
pub trait Sampler {
    fn draw_constraint(&mut self) -> Result<ConstraintSample>;
    fn draw_objective(&mut self) -> Result<ObjectiveSample>;
}

pub trait StochasticProblem: Send + Sync {
    /// `(n, p)`
    fn dims(&self) -> (usize, usize);

    /// A fresh sample stream; equal seeds give equal streams.
    fn sampler(&self, seed: u64) -> Box<dyn Sampler + '_>;

    fn exact(&self) -> Option<&ExactProblem>;
}

/// `C_theta(X) = X^T M_theta X`.
pub fn c_theta(x: &DenseMatrix, s: &ConstraintSample) -> Result<SymMatrix> {
    if x.rows() != s.dim() {
        return Err(Error::dim(
            "c_theta",
            format!("{} rows", s.dim()),
            format!("{} rows", x.rows()),
        ));
    }
    Ok(gram_with(x, &s.apply(x)))
}

/// `H_xi(U, V) = f_xi(U (3/2 I - 1/2 V)) + beta/6 tr(V (V^2 - 3 I))`.
pub fn h_xi_value(
    u: &DenseMatrix,
    v: &SymMatrix,
    o: &ObjectiveSample,
    params: PenaltyParams,
) -> Result<f64> {
    let au = constraint_dissolving_op(u, v)?;
    let f = o
        .value(&au)
        .ok_or(Error::Capability("objective sample value"))?;
    Ok(f + params.beta() / 6.0 * penalty_trace(v))
}

/// `W_{xi,theta}(X, Y) = G (3/2 I - 1/2 Y) - M_theta X sym(X^T G) + beta M_theta X (Y^2 - I)`
/// with `G = grad f_xi(X (3/2 I - 1/2 Y))`.
pub fn w_direction(
    x: &DenseMatrix,
    y: &SymMatrix,
    o: &ObjectiveSample,
    s: &ConstraintSample,
    params: PenaltyParams,
) -> Result<DenseMatrix> {
    if x.rows() != s.dim() {
        return Err(Error::dim(
            "w_direction",
            format!("{} rows", s.dim()),
            format!("{} rows", x.rows()),
        ));
    }
    let g = o.grad(&constraint_dissolving_op(x, y)?);
    if g.shape() != x.shape() {
        return Err(Error::dim(
            "w_direction gradient",
            format!("{:?}", x.shape()),
            format!("{:?}", g.shape()),
        ));
    }
    Ok(direction_kernel(x, y, &g, &s.apply(x), params.beta()))
}

/// Problem whose every draw returns the exact operators.
pub struct DeterministicProblem {
    exact: ExactProblem,
    p: usize,
}

impl DeterministicProblem {
    pub fn new(
        objective: Arc<dyn SmoothObjective>,
        constraint: ConstantConstraint,
        p: usize,
    ) -> Self {
        DeterministicProblem {
            exact: ExactProblem {
                objective,
                constraint,
            },
            p,
        }
    }
}

struct DeterministicSampler<'a>(&'a ExactProblem);

impl Sampler for DeterministicSampler<'_> {
    fn draw_constraint(&mut self) -> Result<ConstraintSample> {
        Ok(ConstraintSample::new(
            self.0.constraint.operator().clone(),
            "exact",
        ))
    }

    fn draw_objective(&mut self) -> Result<ObjectiveSample> {
        Ok(ObjectiveSample::new(
            Arc::new(ExactSample(self.0.objective.clone())),
            "exact",
        ))
    }
}

impl StochasticProblem for DeterministicProblem {
    fn dims(&self) -> (usize, usize) {
        (self.exact.constraint.dim(), self.p)
    }

    fn sampler(&self, _seed: u64) -> Box<dyn Sampler + '_> {
        Box::new(DeterministicSampler(&self.exact))
    }

    fn exact(&self) -> Option<&ExactProblem> {
        Some(&self.exact)
    }
}

/// Which samples a draw averages over.
#[derive(Clone, Debug, PartialEq)]
pub enum Batch {
    All,
    Indices(Arc<[usize]>),
}

impl Batch {
    pub fn len(&self, n_samples: usize) -> usize {
        match self {
            Batch::All => n_samples,
            Batch::Indices(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self, n_samples: usize) -> bool {
        self.len(n_samples) == 0
    }

    fn describe(&self) -> String {
        match self {
            Batch::All => "all".into(),
            Batch::Indices(ix) => format!("batch of {} from sample {}", ix.len(), ix[0]),
        }
    }
}

/// Multi-view data: block `i` is an `N x n_i` matrix, and the decision
/// variable stacks the per-block `n_i x p` coefficient blocks.
#[derive(Clone, Debug)]
pub struct BlockData {
    blocks: Vec<DenseMatrix>,
    offsets: Vec<usize>,
    n_samples: usize,
}

impl BlockData {
    pub fn new(blocks: Vec<DatasetMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Domain("no data blocks".into()));
        }
        let n_samples = blocks[0].samples();
        if let Some(b) = blocks.iter().find(|b| b.samples() != n_samples) {
            return Err(Error::dim(
                "BlockData::new",
                format!("{n_samples} samples in every block"),
                format!("{} samples", b.samples()),
            ));
        }
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.features());
        }
        Ok(BlockData {
            blocks: blocks.into_iter().map(DatasetMatrix::into_dense).collect(),
            offsets,
            n_samples,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block(&self, i: usize) -> &DenseMatrix {
        &self.blocks[i]
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(DenseMatrix::cols).collect()
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Rows of `x` belonging to block `i`.
    pub fn x_block(&self, x: &DenseMatrix, i: usize) -> DenseMatrix {
        x.row_block(self.offsets[i], self.blocks[i].cols())
    }

    /// `Z_i[batch] X_i`, an `l x p` slab.
    pub fn project(&self, i: usize, batch: &Batch, xi: &DenseMatrix) -> DenseMatrix {
        let z = &self.blocks[i];
        match batch {
            Batch::All => z.matmul(xi),
            Batch::Indices(ix) => {
                let p = xi.cols();
                let mut out = DenseMatrix::zeros(ix.len(), p);
                for (r, &s) in ix.iter().enumerate() {
                    let zr = z.row(s);
                    let orow = out.row_mut(r);
                    for (k, &zv) in zr.iter().enumerate() {
                        if zv != 0.0 {
                            for (o, xv) in orow.iter_mut().zip(xi.row(k)) {
                                *o += zv * xv;
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// `Z_i[batch]^T P` for an `l x p` slab `P`.
    pub fn back_project(&self, i: usize, batch: &Batch, slab: &DenseMatrix) -> DenseMatrix {
        let z = &self.blocks[i];
        match batch {
            Batch::All => z.t_matmul(slab),
            Batch::Indices(ix) => {
                let p = slab.cols();
                let mut out = DenseMatrix::zeros(z.cols(), p);
                for (r, &s) in ix.iter().enumerate() {
                    let srow = slab.row(r);
                    for (k, &zv) in z.row(s).iter().enumerate() {
                        if zv != 0.0 {
                            for (o, sv) in out.row_mut(k).iter_mut().zip(srow) {
                                *o += zv * sv;
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Second-moment matrix of block `i` over all samples, `(1/N) Z_i^T Z_i`.
    /// Materializes `n_i x n_i`; meant for oracles and small blocks.
    pub fn block_covariance(&self, i: usize, j: usize) -> DenseMatrix {
        self.blocks[i]
            .t_matmul(&self.blocks[j])
            .scale(1.0 / self.n_samples as f64)
    }
}

/// Block-diagonal minibatch second-moment action
/// `X_i -> (1/l) Z_i[batch]^T Z_i[batch] X_i`.
pub struct BlockMomentOperator {
    data: Arc<BlockData>,
    batch: Batch,
}

impl BlockMomentOperator {
    pub fn new(data: Arc<BlockData>, batch: Batch) -> Self {
        BlockMomentOperator { data, batch }
    }
}

impl LinearOperator for BlockMomentOperator {
    fn dim(&self) -> usize {
        self.data.total_dim()
    }

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let l = self.batch.len(self.data.n_samples()) as f64;
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for i in 0..self.data.n_blocks() {
            let xi = self.data.x_block(x, i);
            let slab = self.data.project(i, &self.batch, &xi);
            let yi = self.data.back_project(i, &self.batch, &slab).scale(1.0 / l);
            out.set_row_block(self.data.offset(i), &yi);
        }
        out
    }
}

/// An objective defined by averaging over a batch of data samples.
pub trait BatchObjective: Send + Sync {
    fn sample(&self, data: &Arc<BlockData>, batch: Batch) -> Arc<dyn SampleObjective>;

    fn exact(&self, data: &Arc<BlockData>) -> Arc<dyn SmoothObjective>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchOptions {
    pub batch_size: usize,
    /// Objective draws reuse the batch of the preceding constraint draw.
    pub shared: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            batch_size: 100,
            shared: true,
        }
    }
}

/// Uniform minibatch sampling from finite data, one shuffled pass per epoch.
pub struct EmpiricalProblem {
    data: Arc<BlockData>,
    objective: Arc<dyn BatchObjective>,
    options: BatchOptions,
    p: usize,
    exact: ExactProblem,
}

impl EmpiricalProblem {
    pub fn data(&self) -> &Arc<BlockData> {
        &self.data
    }

    pub fn options(&self) -> BatchOptions {
        self.options
    }

    /// Batches per pass, `ceil(N / l)`.
    pub fn batches_per_pass(&self) -> usize {
        self.data.n_samples().div_ceil(self.options.batch_size)
    }

    pub fn constraint_sample(&self, batch: Batch) -> ConstraintSample {
        let desc = batch.describe();
        ConstraintSample::new(
            Arc::new(BlockMomentOperator::new(self.data.clone(), batch)),
            desc,
        )
    }

    pub fn objective_sample(&self, batch: Batch) -> ObjectiveSample {
        let desc = batch.describe();
        ObjectiveSample::new(self.objective.sample(&self.data, batch), desc)
    }
}

pub fn empirical_problem_from_data(
    blocks: Vec<DatasetMatrix>,
    objective: Arc<dyn BatchObjective>,
    p: usize,
    options: BatchOptions,
) -> Result<EmpiricalProblem> {
    let data = Arc::new(BlockData::new(blocks)?);
    if options.batch_size == 0 || options.batch_size > data.n_samples() {
        return Err(Error::Domain(format!(
            "batch size must lie in [1, {}], got {}",
            data.n_samples(),
            options.batch_size
        )));
    }
    if p == 0 || data.block_dims().iter().any(|&d| d < p) {
        return Err(Error::Domain(format!(
            "p = {p} must be positive and at most every block width {:?}",
            data.block_dims()
        )));
    }
    let op: Arc<dyn LinearOperator> = Arc::new(BlockMomentOperator::new(data.clone(), Batch::All));
    let constraint = if data.block_dims().iter().all(|&d| d <= SYM_EIG_MAX_DIM) {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..data.n_blocks() {
            let (ev, _) = sym_eig(&sym_part(&data.block_covariance(i, i)));
            lo = lo.min(ev[0]);
            hi = hi.max(*ev.last().unwrap());
        }
        ConstantConstraint::new(op, lo, hi)
    } else {
        ConstantConstraint::with_estimated_spectrum(op, 500)
    }
    .map_err(|_| Error::RankDeficient {
        what: "data second-moment matrix",
        min_eig: 0.0,
        max_eig: 0.0,
    })?;
    let exact = ExactProblem {
        objective: objective.exact(&data),
        constraint,
    };
    Ok(EmpiricalProblem {
        data,
        objective,
        options,
        p,
        exact,
    })
}

/// Endless stream of shuffled batches, reshuffling at the end of every pass.
struct EpochStream {
    rng: ChaCha8Rng,
    n: usize,
    l: usize,
    current: BatchIterator,
}

impl EpochStream {
    fn new(n: usize, l: usize, mut rng: ChaCha8Rng) -> Result<Self> {
        let current = BatchIterator::with_rng(n, l, &mut rng)?;
        Ok(EpochStream { rng, n, l, current })
    }

    fn next_batch(&mut self) -> Result<Batch> {
        if let Some(b) = self.current.next() {
            return Ok(Batch::Indices(b.into()));
        }
        self.current = BatchIterator::with_rng(self.n, self.l, &mut self.rng)?;
        Ok(Batch::Indices(self.current.next().unwrap().into()))
    }
}

struct EmpiricalSampler<'a> {
    problem: &'a EmpiricalProblem,
    constraints: EpochStream,
    objectives: Option<EpochStream>,
    pending: Option<Batch>,
}

impl Sampler for EmpiricalSampler<'_> {
    fn draw_constraint(&mut self) -> Result<ConstraintSample> {
        let batch = self.constraints.next_batch()?;
        if self.objectives.is_none() {
            self.pending = Some(batch.clone());
        }
        Ok(self.problem.constraint_sample(batch))
    }

    fn draw_objective(&mut self) -> Result<ObjectiveSample> {
        let batch = match &mut self.objectives {
            Some(stream) => stream.next_batch()?,
            None => match self.pending.take() {
                Some(b) => b,
                None => self.constraints.next_batch()?,
            },
        };
        Ok(self.problem.objective_sample(batch))
    }
}

impl StochasticProblem for EmpiricalProblem {
    fn dims(&self) -> (usize, usize) {
        (self.data.total_dim(), self.p)
    }

    fn sampler(&self, seed: u64) -> Box<dyn Sampler + '_> {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        let cons_rng = ChaCha8Rng::seed_from_u64(root.random());
        let obj_rng = ChaCha8Rng::seed_from_u64(root.random());
        let (n, l) = (self.data.n_samples(), self.options.batch_size);
        Box::new(EmpiricalSampler {
            problem: self,
            constraints: EpochStream::new(n, l, cons_rng).expect("validated batch size"),
            objectives: (!self.options.shared)
                .then(|| EpochStream::new(n, l, obj_rng).expect("validated batch size")),
            pending: None,
        })
    }

    fn exact(&self) -> Option<&ExactProblem> {
        Some(&self.exact)
    }
}
