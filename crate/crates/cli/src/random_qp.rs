//! Random feasible test problems for `solve-qp` without a file.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thrustwalk::qp::QpProblem;

const NUM_VARS: usize = 4;
const NUM_CONSTRAINTS: usize = 6;

/// Strictly convex, with a known interior point, so the solver must report
/// Optimal. Identical seeds give identical problems.
pub fn random_feasible_problem(seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform =
        |rows, cols| DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    let m = uniform(NUM_VARS, NUM_VARS);
    let p = m.transpose() * &m + DMatrix::identity(NUM_VARS, NUM_VARS) * 0.1;
    let p = (&p + p.transpose()) * 0.5;
    let c = uniform(NUM_VARS, 1).column(0) * 4.0;
    let a = uniform(NUM_CONSTRAINTS, NUM_VARS);
    let interior = uniform(NUM_VARS, 1).column(0) * 0.5;
    let slack = uniform(NUM_CONSTRAINTS, 1)
        .column(0)
        .map(|v| 0.05 + v.abs() * 0.5);
    let b: DVector<f64> = &a * &interior + slack;
    QpProblem::new(p, c.into_owned(), a, b).expect("constructed valid")
}
