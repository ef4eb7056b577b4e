//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use gsopt_core::gcca::{synthetic_gaussian_problem, Merit, SyntheticSpec};
use gsopt_core::objective::QuadraticObjective;
use gsopt_core::oracle::{BatchOptions, EmpiricalProblem};
use gsopt_core::verify::random_spd;
use gsopt_core::ConstantConstraint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Quadratic {
    pub objective: QuadraticObjective,
    pub constraint: ConstantConstraint,
}

/// Quadratic objective and constraint with spectra in `[1, 10]` and `[0.5, 2]`.
pub fn quadratic(n: usize, seed: u64) -> Quadratic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_spd(n, 0.5, 2.0, &mut rng);
    let a = random_spd(n, 1.0, 10.0, &mut rng);
    Quadratic {
        objective: QuadraticObjective::new(a),
        constraint: ConstantConstraint::from_dense(m).expect("SPD"),
    }
}

/// Planted two-view CCA with `samples` rows per view and five correlations.
pub fn synthetic(dim: usize, samples: usize, batch_size: usize) -> Arc<EmpiricalProblem> {
    let spec = SyntheticSpec {
        dims: (dim, dim),
        correlations: vec![0.9, 0.8, 0.7, 0.6, 0.5],
        n_samples: samples,
        seed: 1,
    };
    let (problem, _) = synthetic_gaussian_problem(
        &spec,
        Merit::Identity,
        BatchOptions {
            batch_size,
            shared: true,
        },
    )
    .expect("valid spec");
    Arc::new(problem)
}
