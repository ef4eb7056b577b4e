//! Validation of a [`RunConfig`] into runnable problems and jobs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gsopt_core::data::{load_bin, load_csv, split_blocks, standardize, DatasetMatrix};
use gsopt_core::gcca::{
    gcca_problem_to_stochastic, sample_ground_truth, synthetic_cca, BlockSpec, GccaProblem,
    GroundTruth, Merit, SyntheticSpec, DEFAULT_HUBER_MU,
};
use gsopt_core::linalg::symmetrize;
use gsopt_core::objective::{generalized_eigenvalues, QuadraticObjective};
use gsopt_core::optim::{AdaParams, MetricCadence, StepMode, StepSchedule};
use gsopt_core::oracle::{BatchOptions, DeterministicProblem, EmpiricalProblem};
use gsopt_core::penalty::{beta_threshold, PenaltyParams};
use gsopt_core::verify::random_spd;
use gsopt_core::{ConstantConstraint, DenseMatrix, StochasticProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    CadenceConfig, MeritKind, ModeKind, ProblemConfig, ProblemKind, RunConfig, SolverKind,
};
use crate::failure::{CliResult, Failure};

/// Default GCCA penalty parameter.
pub const GCCA_BETA: f64 = 0.1;

pub enum Built {
    Quadratic {
        problem: DeterministicProblem,
        objective: QuadraticObjective,
        constraint: ConstantConstraint,
        /// Half the sum of the `p` smallest generalized eigenvalues.
        optimum: f64,
    },
    Empirical {
        problem: EmpiricalProblem,
        truth: Option<GroundTruth>,
    },
}

impl Built {
    pub fn stochastic(&self) -> &dyn StochasticProblem {
        match self {
            Built::Quadratic { problem, .. } => problem,
            Built::Empirical { problem, .. } => problem,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.stochastic().dims()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub solver: SolverKind,
    /// Unused by `det-gd`.
    pub s1: f64,
    pub s2: f64,
    pub seed: u64,
}

impl Job {
    /// Identifier of the grid cell, shared by all seeds.
    pub fn cell(&self) -> String {
        match self.solver {
            SolverKind::DetGd => format!("{}_s2-{}", self.solver.name(), self.s2),
            _ => format!("{}_s1-{}_s2-{}", self.solver.name(), self.s1, self.s2),
        }
    }

    pub fn tag(&self) -> String {
        format!("{}_seed-{}", self.cell(), self.seed)
    }
}

pub struct Plan {
    pub built: Built,
    pub jobs: Vec<Job>,
    pub params: PenaltyParams,
    pub iterations: usize,
    pub mode: StepMode,
    pub ada: AdaParams,
    pub cadence: MetricCadence,
    pub out_dir: PathBuf,
    pub plot_data: bool,
}

impl Plan {
    pub fn schedule(&self, job: &Job) -> CliResult<StepSchedule> {
        Ok(StepSchedule::new(
            job.s1,
            job.s2,
            self.iterations,
            self.mode,
        )?)
    }
}

fn need<T: Clone>(v: &Option<T>, key: &str, kind: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| Failure::config(format!("problem.{key} is required for {kind} problems")))
}

fn forbid(set: bool, key: &str, kind: &str) -> CliResult<()> {
    if set {
        return Err(Failure::config(format!(
            "problem.{key} does not apply to {kind} problems"
        )));
    }
    Ok(())
}

fn cadence(c: &CadenceConfig) -> CliResult<MetricCadence> {
    match c {
        CadenceConfig::Named(s) => match s.as_str() {
            "auto" => Ok(MetricCadence::Auto),
            "ends" => Ok(MetricCadence::Ends),
            "never" => Ok(MetricCadence::Never),
            other => Err(Failure::config(format!(
                "output.cadence must be auto, ends, never or a positive integer, got {other:?}"
            ))),
        },
        CadenceConfig::Every(0) => Err(Failure::config("output.cadence must be positive")),
        CadenceConfig::Every(k) => Ok(MetricCadence::Every(*k)),
    }
}

/// Reads a matrix file, choosing the format from the extension.
pub fn load_matrix(path: &Path) -> CliResult<DatasetMatrix> {
    if !path.exists() {
        return Err(Failure::io(path.display(), "no such file"));
    }
    let gsmx = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gsmx"));
    Ok(if gsmx {
        load_bin(path)?
    } else {
        load_csv(path)?
    })
}

fn merit(pc: &ProblemConfig) -> CliResult<Merit> {
    match pc.merit.unwrap_or(MeritKind::Identity) {
        MeritKind::Identity => {
            forbid(pc.mu.is_some(), "mu", "identity-merit")?;
            Ok(Merit::Identity)
        }
        MeritKind::Huber => Ok(Merit::huber(pc.mu.unwrap_or(DEFAULT_HUBER_MU))?),
    }
}

/// Field checks that need no data.
fn check_fields(cfg: &RunConfig) -> CliResult<()> {
    let pc = &cfg.problem;
    let kind = match pc.kind {
        ProblemKind::Quadratic => "quadratic",
        ProblemKind::Gcca => "gcca",
        ProblemKind::SyntheticCca => "synthetic-cca",
    };
    let quad_keys = [
        (pc.n.is_some(), "n"),
        (pc.matrix_seed.is_some(), "matrix_seed"),
        (pc.a_path.is_some(), "a_path"),
        (pc.m_path.is_some(), "m_path"),
    ];
    let gcca_keys = [
        (pc.views.is_some(), "views"),
        (pc.data_path.is_some(), "data_path"),
        (pc.blocks.is_some(), "blocks"),
        (pc.weights.is_some(), "weights"),
    ];
    let data_keys = [
        (pc.center.is_some(), "center"),
        (pc.scale.is_some(), "scale"),
        (pc.merit.is_some(), "merit"),
        (pc.mu.is_some(), "mu"),
    ];
    let synth_keys = [
        (pc.dims.is_some(), "dims"),
        (pc.correlations.is_some(), "correlations"),
        (pc.samples.is_some(), "samples"),
        (pc.data_seed.is_some(), "data_seed"),
    ];
    let mut foreign: Vec<(bool, &str)> = Vec::new();
    match pc.kind {
        ProblemKind::Quadratic => {
            foreign.extend(gcca_keys);
            foreign.extend(data_keys);
            foreign.extend(synth_keys);
        }
        ProblemKind::Gcca => {
            foreign.extend(quad_keys);
            foreign.extend(synth_keys);
        }
        ProblemKind::SyntheticCca => {
            foreign.extend(quad_keys);
            foreign.extend(gcca_keys);
            foreign.extend([
                (pc.center.is_some(), "center"),
                (pc.scale.is_some(), "scale"),
            ]);
        }
    }
    for (set, key) in foreign {
        forbid(set, key, kind)?;
    }

    let sc = &cfg.solver;
    if sc.seeds.is_empty() {
        return Err(Failure::config("solver.seeds must list at least one seed"));
    }
    let mut seen = sc.seeds.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != sc.seeds.len() {
        return Err(Failure::config("solver.seeds contains duplicates"));
    }
    let kinds = sc.kind.to_vec();
    if kinds.is_empty() {
        return Err(Failure::config("solver.kind must name at least one solver"));
    }
    for s1 in sc.s1.as_ref().map(|v| v.to_vec()).unwrap_or_default() {
        StepSchedule::new(s1, 0.0, 1, StepMode::Constant)
            .map_err(|e| Failure::config(format!("solver.s1: {e}")))?;
    }
    let s2 = sc.s2.to_vec();
    if s2.is_empty() {
        return Err(Failure::config("solver.s2 must list at least one value"));
    }
    for v in &s2 {
        StepSchedule::new(1.0, *v, 1, StepMode::Constant)
            .map_err(|e| Failure::config(format!("solver.s2: {e}")))?;
        if kinds.contains(&SolverKind::DetGd) && !(*v > 0.0) {
            return Err(Failure::config("det-gd needs a positive step s2"));
        }
    }
    if let Some(b) = sc.beta {
        PenaltyParams::new(b).map_err(|e| Failure::config(format!("solver.beta: {e}")))?;
    }
    if sc.iterations.is_some() == sc.epochs.is_some() {
        return Err(Failure::config(
            "set exactly one of solver.iterations and solver.epochs",
        ));
    }
    if sc.epochs == Some(0) {
        return Err(Failure::config("solver.epochs must be positive"));
    }
    let has_ada_keys = sc.eta1.is_some() || sc.eta2.is_some() || sc.eps.is_some();
    if has_ada_keys && !kinds.contains(&SolverKind::CdfsgAda) {
        return Err(Failure::config(
            "solver.eta1/eta2/eps only apply to cdfsg-ada",
        ));
    }
    if pc.kind == ProblemKind::Quadratic {
        if sc.epochs.is_some() {
            return Err(Failure::config(
                "solver.epochs needs a data problem; use solver.iterations",
            ));
        }
        if sc.batch_size.is_some() || sc.shared_batches.is_some() {
            return Err(Failure::config(
                "solver.batch_size and solver.shared_batches need a data problem",
            ));
        }
    }
    let needs_s1 = kinds.iter().any(|k| *k != SolverKind::DetGd);
    if needs_s1 && sc.s1.is_none() {
        return Err(Failure::config("solver.s1 is required for cdfsg solvers"));
    }
    cadence(&cfg.output.cadence)?;
    Ok(())
}

fn ada_params(cfg: &RunConfig) -> CliResult<AdaParams> {
    let d = AdaParams::default();
    let sc = &cfg.solver;
    AdaParams::new(
        sc.eta1.unwrap_or(d.eta1()),
        sc.eta2.unwrap_or(d.eta2()),
        sc.eps.unwrap_or(d.eps()),
    )
    .map_err(|e| Failure::config(format!("solver: {e}")))
}

fn quadratic(pc: &ProblemConfig) -> CliResult<(Built, f64)> {
    let p = need(&pc.p, "p", "quadratic")?;
    let (a, m) = match (&pc.a_path, &pc.m_path) {
        (Some(ap), Some(mp)) => {
            forbid(pc.n.is_some(), "n", "file-backed quadratic")?;
            forbid(
                pc.matrix_seed.is_some(),
                "matrix_seed",
                "file-backed quadratic",
            )?;
            let a = load_matrix(ap)?.into_dense();
            let m = load_matrix(mp)?.into_dense();
            let sym = |x: DenseMatrix, what: &str| -> CliResult<_> {
                if x.rows() != x.cols() {
                    return Err(Failure::config(format!("{what} must be square")));
                }
                let s = symmetrize(&x)?;
                if (s.as_dense() - &x).max_abs() > 1e-12 * (1.0 + x.max_abs()) {
                    return Err(Failure::config(format!("{what} must be symmetric")));
                }
                Ok(s)
            };
            (sym(a, "A")?, sym(m, "M")?)
        }
        (None, None) => {
            let n = need(&pc.n, "n", "generated quadratic")?;
            if n == 0 {
                return Err(Failure::config("problem.n must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(pc.matrix_seed.unwrap_or(0));
            let m = random_spd(n, 0.5, 2.0, &mut rng);
            let a = random_spd(n, 1.0, 10.0, &mut rng);
            (a, m)
        }
        _ => {
            return Err(Failure::config(
                "problem.a_path and problem.m_path must be given together",
            ))
        }
    };
    let n = a.dim();
    if m.dim() != n {
        return Err(Failure::config(format!(
            "A is {n}x{n} but M is {0}x{0}",
            m.dim()
        )));
    }
    if p == 0 || p > n {
        return Err(Failure::config(format!("problem.p must lie in [1, {n}]")));
    }
    let constraint = ConstantConstraint::from_dense(m.clone())
        .map_err(|e| Failure::config(format!("M: {e}")))?;
    let objective = QuadraticObjective::new(a.clone());
    let eig = generalized_eigenvalues(&a, &m)?;
    let optimum = 0.5 * eig[..p].iter().sum::<f64>();
    let bt = beta_threshold(
        p,
        objective.lipschitz(),
        objective.grad_norm_at_zero(),
        constraint.sigma_min(),
        constraint.sigma_max(),
    )?;
    let problem = DeterministicProblem::new(Arc::new(objective.clone()), constraint.clone(), p);
    Ok((
        Built::Quadratic {
            problem,
            objective,
            constraint,
            optimum,
        },
        bt.max(1.0),
    ))
}

fn gcca(cfg: &RunConfig) -> CliResult<Built> {
    let pc = &cfg.problem;
    let p = need(&pc.p, "p", "gcca")?;
    let merit = merit(pc)?;
    let center = pc.center.unwrap_or(true);
    let scale = pc.scale.unwrap_or(false);
    let views: Vec<DatasetMatrix> = match (&pc.views, &pc.data_path) {
        (Some(paths), None) => {
            forbid(pc.blocks.is_some(), "blocks", "per-view file")?;
            paths
                .iter()
                .map(|p| load_matrix(p))
                .collect::<CliResult<_>>()?
        }
        (None, Some(path)) => {
            let blocks = need(&pc.blocks, "blocks", "single-file gcca")?;
            let spec = BlockSpec::new(blocks)?;
            let whole = load_matrix(path)?;
            split_blocks(&whole, &spec)?
                .iter()
                .map(|v| v.to_dataset())
                .collect()
        }
        _ => {
            return Err(Failure::config(
                "gcca problems need exactly one of problem.views and problem.data_path",
            ))
        }
    };
    let views = views
        .iter()
        .map(|v| standardize(v, center, scale))
        .collect::<Result<Vec<_>, _>>()?;
    let dims: Vec<usize> = views.iter().map(|v| v.features()).collect();
    let problem = GccaProblem::new(BlockSpec::new(dims)?, pc.weights.clone(), merit, p)?;
    let problem = gcca_problem_to_stochastic(problem, views, batch_options(cfg)?)?;
    let truth = if problem.data().n_blocks() == 2 {
        Some(sample_ground_truth(problem.data(), p)?)
    } else {
        None
    };
    Ok(Built::Empirical { problem, truth })
}

fn synthetic(cfg: &RunConfig) -> CliResult<Built> {
    let pc = &cfg.problem;
    let dims = need(&pc.dims, "dims", "synthetic-cca")?;
    let correlations = need(&pc.correlations, "correlations", "synthetic-cca")?;
    if let Some(p) = pc.p {
        if p != correlations.len() {
            return Err(Failure::config(format!(
                "problem.p = {p} differs from the {} planted correlations",
                correlations.len()
            )));
        }
    }
    let spec = SyntheticSpec {
        dims: (dims[0], dims[1]),
        correlations,
        n_samples: need(&pc.samples, "samples", "synthetic-cca")?,
        seed: pc.data_seed.unwrap_or(0),
    };
    let synth = synthetic_cca(&spec)?;
    let p = spec.correlations.len();
    let problem = GccaProblem::new(BlockSpec::new(vec![dims[0], dims[1]])?, None, merit(pc)?, p)?;
    let problem = gcca_problem_to_stochastic(problem, synth.views, batch_options(cfg)?)?;
    Ok(Built::Empirical {
        problem,
        truth: Some(synth.sample_truth),
    })
}

fn batch_options(cfg: &RunConfig) -> CliResult<BatchOptions> {
    let d = BatchOptions::default();
    let batch_size = cfg.solver.batch_size.unwrap_or(d.batch_size);
    if batch_size == 0 {
        return Err(Failure::config("solver.batch_size must be positive"));
    }
    Ok(BatchOptions {
        batch_size,
        shared: cfg.solver.shared_batches.unwrap_or(d.shared),
    })
}

/// Validates the configuration, loads data and expands the job list.
/// `seed` replaces the configured seed list.
pub fn plan(cfg: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> CliResult<Plan> {
    check_fields(cfg)?;
    let ada = ada_params(cfg)?;
    let (built, default_beta) = match cfg.problem.kind {
        ProblemKind::Quadratic => quadratic(&cfg.problem)?,
        ProblemKind::Gcca => (gcca(cfg)?, GCCA_BETA),
        ProblemKind::SyntheticCca => (synthetic(cfg)?, GCCA_BETA),
    };
    let sc = &cfg.solver;
    let iterations = match (sc.iterations, sc.epochs, &built) {
        (Some(k), _, _) => k,
        (None, Some(e), Built::Empirical { problem, .. }) => e * problem.batches_per_pass(),
        _ => unreachable!("checked in check_fields"),
    };
    let params = PenaltyParams::new(sc.beta.unwrap_or(default_beta))?;
    let seeds = match seed {
        Some(s) => vec![s],
        None => sc.seeds.clone(),
    };
    let s1 = sc.s1.as_ref().map(|v| v.to_vec()).unwrap_or_default();
    let mut jobs = Vec::new();
    for solver in sc.kind.to_vec() {
        let s1s = if solver == SolverKind::DetGd {
            vec![0.0]
        } else {
            s1.clone()
        };
        for &a in &s1s {
            for &b in &sc.s2.to_vec() {
                for &seed in &seeds {
                    jobs.push(Job {
                        solver,
                        s1: a,
                        s2: b,
                        seed,
                    });
                }
            }
        }
    }
    let mode = match sc.mode.unwrap_or(ModeKind::Constant) {
        ModeKind::Constant => StepMode::Constant,
        ModeKind::Theory => StepMode::Theory,
    };
    Ok(Plan {
        built,
        jobs,
        params,
        iterations,
        mode,
        ada,
        cadence: cadence(&cfg.output.cadence)?,
        out_dir: out.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf),
        plot_data: cfg.output.plot_data,
    })
}
