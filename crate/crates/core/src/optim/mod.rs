//! Optimizers for the penalty: the tracking stochastic gradient methods,
//! a deterministic gradient-descent baseline and a step-size grid search.

mod gd;
mod grid;
mod record;
mod schedule;
mod tracking;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{DenseMatrix, SymMatrix};

pub use gd::{deterministic_gd_run, DESCENT_SLACK};
pub use grid::{grid_search, CellResult, GridResult, GridSpec, Solver};
pub use record::{MetricRow, RunRecord, RunSummary, CSV_COLUMNS};
pub use schedule::{StepMode, StepSchedule, GRID_S1, GRID_S2};
pub use tracking::{cdfsg_ada_run, cdfsg_run, postprocess, tracker_update, AdaParams};

/// How often the exact-operator metrics (`grad_h`, `kkt`, `pcc`) are filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MetricCadence {
    /// Every `ceil(K / 100)` iterations.
    #[default]
    Auto,
    Every(usize),
    /// Only the first and last rows.
    Ends,
    Never,
}

impl MetricCadence {
    pub(crate) fn period(self, iterations: usize) -> Option<usize> {
        match self {
            MetricCadence::Auto => Some(iterations.div_ceil(100).max(1)),
            MetricCadence::Every(e) => Some(e.max(1)),
            MetricCadence::Ends => Some(iterations.max(1)),
            MetricCadence::Never => None,
        }
    }
}

pub type PointMetric = Arc<dyn Fn(&DenseMatrix) -> Option<f64> + Send + Sync>;

#[derive(Clone)]
pub struct RunOptions {
    pub cadence: MetricCadence,
    /// Extra metric recorded in the `pcc` column on cadence rows.
    pub metric: Option<PointMetric>,
    /// Abort once `|fval|` exceeds this.
    pub divergence_limit: f64,
    /// Start the tracker from one constraint draw even when exact operators exist.
    pub sampled_y0: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            cadence: MetricCadence::Auto,
            metric: None,
            divergence_limit: 1e12,
            sampled_y0: false,
        }
    }
}

impl std::fmt::Debug for RunOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunOptions")
            .field("cadence", &self.cadence)
            .field("metric", &self.metric.is_some())
            .field("divergence_limit", &self.divergence_limit)
            .field("sampled_y0", &self.sampled_y0)
            .finish()
    }
}

/// State handed to per-iteration hooks.
pub struct IterView<'a> {
    pub k: usize,
    pub x: &'a DenseMatrix,
    pub y: &'a SymMatrix,
    pub d: &'a DenseMatrix,
    pub first_moment: Option<&'a DenseMatrix>,
    pub second_moment: Option<&'a DenseMatrix>,
    pub max_second_moment: Option<&'a DenseMatrix>,
    pub row: &'a MetricRow,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub x: DenseMatrix,
    pub y: SymMatrix,
    pub record: RunRecord,
}

/// Gaussian `n x p` start with entries of variance `1/n`.
pub fn initial_point(n: usize, p: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    DenseMatrix::from_fn(n, p, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    })
}
