use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::oracle::StochasticProblem;
use crate::penalty::{h_value, PenaltyParams};

use super::{cdfsg_ada_run, cdfsg_run, AdaParams, RunOptions, RunOutput, StepMode, StepSchedule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solver {
    Cdfsg,
    CdfsgAda(AdaParams),
}

impl Solver {
    #[allow(clippy::too_many_arguments)]
    pub fn run(
        &self,
        problem: &dyn StochasticProblem,
        x0: &DenseMatrix,
        sched: &StepSchedule,
        params: PenaltyParams,
        seed: u64,
        opts: &RunOptions,
    ) -> Result<RunOutput> {
        match self {
            Solver::Cdfsg => cdfsg_run(problem, x0, sched, params, seed, opts, None),
            Solver::CdfsgAda(a) => cdfsg_ada_run(problem, x0, sched, params, *a, seed, opts, None),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Cdfsg => "cdfsg",
            Solver::CdfsgAda(_) => "cdfsg-ada",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub iterations: usize,
    pub mode: StepMode,
}

#[derive(Debug)]
pub struct CellResult {
    pub s1: f64,
    pub s2: f64,
    /// Median over seeds of the terminal penalty value, exact when the
    /// problem has exact operators; `+inf` for failed runs.
    pub score: f64,
    pub runs: Vec<Result<RunOutput>>,
}

#[derive(Debug)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::INFINITY;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn terminal_score(
    problem: &dyn StochasticProblem,
    params: PenaltyParams,
    out: &Result<RunOutput>,
) -> f64 {
    let Ok(out) = out else {
        return f64::INFINITY;
    };
    let v = match problem.exact() {
        Some(e) => {
            h_value(&out.x, e.objective.as_ref(), &e.constraint, params).unwrap_or(f64::INFINITY)
        }
        None => out.record.last_with(|r| r.fval).unwrap_or(f64::INFINITY),
    };
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Runs every `(s1, s2, start)` combination on a pool of `jobs` workers and
/// selects the cell with the lowest median terminal penalty value; ties go to
/// the smaller `s2`.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    problem: &dyn StochasticProblem,
    solver: Solver,
    starts: &[(u64, DenseMatrix)],
    grid: &GridSpec,
    params: PenaltyParams,
    opts: &RunOptions,
    jobs: usize,
) -> Result<GridResult> {
    if grid.s1.is_empty() || grid.s2.is_empty() || starts.is_empty() {
        return Err(Error::Domain(
            "grid search needs step constants and starts".into(),
        ));
    }
    let mut cells_spec = Vec::new();
    for &s1 in &grid.s1 {
        for &s2 in &grid.s2 {
            cells_spec.push(StepSchedule::new(s1, s2, grid.iterations, grid.mode)?);
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells_spec.len())
        .flat_map(|c| (0..starts.len()).map(move |s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("worker pool: {e}")))?;
    let outputs: Vec<Result<RunOutput>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, s)| {
                let (seed, x0) = &starts[s];
                solver.run(problem, x0, &cells_spec[c], params, *seed, opts)
            })
            .collect()
    });

    let mut outputs = outputs.into_iter();
    let mut cells = Vec::with_capacity(cells_spec.len());
    for sched in &cells_spec {
        let runs: Vec<Result<RunOutput>> = outputs.by_ref().take(starts.len()).collect();
        let score = median(
            runs.iter()
                .map(|r| terminal_score(problem, params, r))
                .collect(),
        );
        cells.push(CellResult {
            s1: sched.s1(),
            s2: sched.s2(),
            score,
            runs,
        });
    }
    let best = (0..cells.len())
        .min_by(|&a, &b| {
            cells[a]
                .score
                .total_cmp(&cells[b].score)
                .then(cells[a].s2.total_cmp(&cells[b].s2))
        })
        .unwrap();
    Ok(GridResult { cells, best })
}
