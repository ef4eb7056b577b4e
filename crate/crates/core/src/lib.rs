//! Optimization over expectation-constrained generalized Stiefel manifolds
//! `{X : X^T M X = I}` with `M = E[M_theta]`, through the constraint
//! dissolving penalty and tracking-based stochastic gradient methods.

pub mod data;
pub mod error;
pub mod gcca;
pub mod linalg;
pub mod objective;
pub mod optim;
pub mod oracle;
pub mod penalty;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, LinearOperator, SymMatrix};
pub use objective::{ConstantConstraint, SmoothObjective};
pub use optim::{RunOptions, RunOutput, RunRecord, StepMode, StepSchedule};
pub use oracle::{ConstraintSample, ObjectiveSample, StochasticProblem};
pub use penalty::{PenaltyParams, StationarityReport};
