//! `gsopt solve`: run every (solver, cell, seed) job and write traces,
//! iterates and the per-cell summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use gsopt_core::data::save_bin;
use gsopt_core::gcca::pcc;
use gsopt_core::linalg::{feasibility_violation, gram};
use gsopt_core::optim::{
    cdfsg_ada_run, cdfsg_run, deterministic_gd_run, initial_point, postprocess, RunOptions,
    RunRecord,
};
use gsopt_core::penalty::kkt_residual;
use gsopt_core::{ConstantConstraint, DenseMatrix, Error, SmoothObjective};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{RunConfig, SolverKind};
use crate::failure::{CliResult, Failure};
use crate::problem::{plan, Built, Job, Plan};
use crate::report;

/// Mixed into the run seed for the starting point so that the start and the
/// sample stream use different generator states.
const START_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn start_seed(seed: u64) -> u64 {
    seed ^ START_STREAM
}

/// Terminal quantities of one job; `None` where unavailable.
#[derive(Clone, Debug, Default)]
pub struct Terminal {
    pub fval: Option<f64>,
    pub f: Option<f64>,
    pub f_pp: Option<f64>,
    pub feas: Option<f64>,
    pub feas_pp: Option<f64>,
    pub kkt: Option<f64>,
    pub pcc: Option<f64>,
    pub pcc_pp: Option<f64>,
    pub wall_s: Option<f64>,
}

pub struct JobOutcome {
    pub job: Job,
    pub record: RunRecord,
    pub x: Option<DenseMatrix>,
    pub pp: Option<DenseMatrix>,
    pub terminal: Terminal,
    pub error: Option<Error>,
}

fn exact(built: &Built) -> (&dyn SmoothObjective, &ConstantConstraint) {
    match built {
        Built::Quadratic {
            objective,
            constraint,
            ..
        } => (objective, constraint),
        Built::Empirical { problem, .. } => {
            let e = gsopt_core::StochasticProblem::exact(problem)
                .expect("empirical problems are exact");
            (e.objective.as_ref(), &e.constraint)
        }
    }
}

fn run_options(plan: &Plan) -> RunOptions {
    let metric = match &plan.built {
        Built::Empirical {
            problem,
            truth: Some(truth),
        } => {
            let data = problem.data().clone();
            let truth = truth.clone();
            let f: gsopt_core::optim::PointMetric =
                Arc::new(move |x: &DenseMatrix| pcc(x, &data, &truth).ok());
            Some(f)
        }
        _ => None,
    };
    RunOptions {
        cadence: plan.cadence,
        metric,
        ..Default::default()
    }
}

pub fn run_job(plan: &Plan, job: &Job, opts: &RunOptions) -> CliResult<JobOutcome> {
    let (n, p) = plan.built.dims();
    let x0 = initial_point(n, p, start_seed(job.seed));
    let (obj, cons) = exact(&plan.built);
    let result = match job.solver {
        SolverKind::DetGd => {
            deterministic_gd_run(obj, cons, &x0, job.s2, plan.iterations, plan.params, opts)
                .and_then(|(x, record)| {
                    let y = gram(&x, cons.operator().as_ref())?;
                    Ok((x, y, record))
                })
        }
        SolverKind::Cdfsg | SolverKind::CdfsgAda => {
            let sched = plan.schedule(job)?;
            let problem = plan.built.stochastic();
            let out = if job.solver == SolverKind::Cdfsg {
                cdfsg_run(problem, &x0, &sched, plan.params, job.seed, opts, None)
            } else {
                cdfsg_ada_run(
                    problem,
                    &x0,
                    &sched,
                    plan.params,
                    plan.ada,
                    job.seed,
                    opts,
                    None,
                )
            };
            out.map(|o| (o.x, o.y, o.record))
        }
    };
    let (x, y, record) = match result {
        Ok(v) => v,
        Err(Error::Divergence {
            iteration,
            reason,
            partial,
        }) => {
            let record = *partial;
            let terminal = Terminal {
                fval: record.last_with(|r| r.fval),
                wall_s: Some(record.summary.wall_s),
                ..Default::default()
            };
            return Ok(JobOutcome {
                job: *job,
                record: record.clone(),
                x: None,
                pp: None,
                terminal,
                error: Some(Error::Divergence {
                    iteration,
                    reason,
                    partial: Box::new(record),
                }),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let op = cons.operator().as_ref();
    let pp = postprocess(&x, &y).ok();
    let pcc_of = |z: &DenseMatrix| match &plan.built {
        Built::Empirical {
            problem,
            truth: Some(t),
        } => pcc(z, problem.data(), t).ok(),
        _ => None,
    };
    let terminal = Terminal {
        fval: record.last_with(|r| r.fval),
        f: Some(obj.value(&x)),
        f_pp: pp.as_ref().map(|z| obj.value(z)),
        feas: Some(feasibility_violation(&gram(&x, op)?)),
        feas_pp: match &pp {
            Some(z) => Some(feasibility_violation(&gram(z, op)?)),
            None => None,
        },
        kkt: kkt_residual(&x, obj, cons, plan.params)
            .ok()
            .map(|r| r.kkt_norm),
        pcc: pcc_of(&x),
        pcc_pp: pp.as_ref().and_then(pcc_of),
        wall_s: Some(record.summary.wall_s),
    };
    Ok(JobOutcome {
        job: *job,
        record,
        x: Some(x),
        pp,
        terminal,
        error: None,
    })
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (Some(mean), None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn push(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
}

const SUMMARY_METRICS: [&str; 9] = [
    "fval", "f", "f_pp", "feas", "feas_pp", "kkt", "pcc", "pcc_pp", "wall_s",
];

fn metric(t: &Terminal, name: &str) -> Option<f64> {
    match name {
        "fval" => t.fval,
        "f" => t.f,
        "f_pp" => t.f_pp,
        "feas" => t.feas,
        "feas_pp" => t.feas_pp,
        "kkt" => t.kkt,
        "pcc" => t.pcc,
        "pcc_pp" => t.pcc_pp,
        "wall_s" => t.wall_s,
        _ => unreachable!(),
    }
}

/// One row per grid cell with mean and sample standard deviation over its
/// seeds. Failed runs only count in `failed`.
pub fn summary_csv(plan: &Plan, outcomes: &[JobOutcome]) -> String {
    let optimum = match &plan.built {
        Built::Quadratic { optimum, .. } => Some(*optimum),
        _ => None,
    };
    let mut out =
        String::from("cell,solver,s1,s2,alpha,tracking_weight,beta,iterations,runs,failed,f_opt");
    for m in SUMMARY_METRICS {
        let _ = write!(out, ",{m}_mean,{m}_std");
    }
    out.push('\n');
    let mut cells: Vec<String> = Vec::new();
    for o in outcomes {
        let c = o.job.cell();
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    for cell in cells {
        let group: Vec<&JobOutcome> = outcomes.iter().filter(|o| o.job.cell() == cell).collect();
        let job = group[0].job;
        let failed = group.iter().filter(|o| o.error.is_some()).count();
        let _ = write!(out, "{cell},{}", job.solver.name());
        let (alpha, b) = match job.solver {
            SolverKind::DetGd => {
                out.push(',');
                (Some(job.s2), None)
            }
            _ => {
                let _ = write!(out, ",{}", job.s1);
                let s = plan.schedule(&job).expect("validated schedule");
                (Some(s.alpha()), Some(s.tracking_weight()))
            }
        };
        let _ = write!(out, ",{}", job.s2);
        push(&mut out, alpha);
        push(&mut out, b);
        let _ = write!(
            out,
            ",{},{},{},{}",
            plan.params.beta(),
            plan.iterations,
            group.len(),
            failed
        );
        push(&mut out, optimum);
        for m in SUMMARY_METRICS {
            let vals: Vec<f64> = group
                .iter()
                .filter(|o| o.error.is_none())
                .filter_map(|o| metric(&o.terminal, m))
                .collect();
            let (mean, std) = mean_std(&vals);
            push(&mut out, mean);
            push(&mut out, std);
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| Failure::io(path.display(), e))
}

fn write_outputs(plan: &Plan, cfg: &RunConfig, outcomes: &[JobOutcome]) -> CliResult<()> {
    let dir = &plan.out_dir;
    let runs = dir.join("runs");
    let iterates = dir.join("iterates");
    for d in [&runs, &iterates] {
        fs::create_dir_all(d).map_err(|e| Failure::io(d.display(), e))?;
    }
    write(&dir.join("config.toml"), &cfg.to_toml())?;
    for o in outcomes {
        let tag = o.job.tag();
        write(&runs.join(format!("{tag}.csv")), &o.record.to_csv())?;
        if let Some(x) = &o.x {
            let p = iterates.join(format!("{tag}.gsmx"));
            save_bin(&p, x).map_err(|e| Failure::io(p.display(), e))?;
        }
        if let Some(z) = &o.pp {
            let p = iterates.join(format!("{tag}_pp.gsmx"));
            save_bin(&p, z).map_err(|e| Failure::io(p.display(), e))?;
        }
    }
    write(&dir.join("summary.csv"), &summary_csv(plan, outcomes))?;
    if plan.plot_data {
        report::write_plot_data(&runs, &dir.join("plots"))?;
    }
    Ok(())
}

/// Runs the plan on `jobs` workers.
pub fn execute(plan: &Plan, jobs: usize) -> CliResult<Vec<JobOutcome>> {
    let opts = run_options(plan);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::config(format!("worker pool: {e}")))?;
    pool.install(|| {
        plan.jobs
            .par_iter()
            .map(|job| {
                let o = run_job(plan, job, &opts)?;
                match &o.error {
                    None => info!("{} done", job.tag()),
                    Some(e) => warn!("{}: {e}", job.tag()),
                }
                Ok(o)
            })
            .collect()
    })
}

pub fn cmd_solve(
    cfg: &RunConfig,
    seed: Option<u64>,
    out: Option<&Path>,
    jobs: usize,
) -> CliResult<Vec<JobOutcome>> {
    let plan = plan(cfg, seed, out)?;
    info!(
        "{} jobs, {} iterations each, beta {}",
        plan.jobs.len(),
        plan.iterations,
        plan.params.beta()
    );
    let outcomes = execute(&plan, jobs)?;
    write_outputs(&plan, cfg, &outcomes)?;
    let failed: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.error.as_ref().map(|e| format!("{}: {e}", o.job.tag())))
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Numerical(failed.join("; ")));
    }
    Ok(outcomes)
}
