//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thrustwalk::qp::QpProblem;

/// Exhaustive active-set solution of `min u'Pu + c'u s.t. Au <= b`.
///
/// Every subset of constraints is treated as equalities; the KKT system
/// `[2P A_S'; A_S 0]` is solved and the candidate kept if it is primal and
/// dual feasible. For strictly convex problems that point is the unique
/// optimum. Returns `None` when no subset qualifies (infeasible problem).
pub fn active_set_oracle(prob: &QpProblem) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = prob.num_vars();
    let m = prob.num_constraints();
    assert!(m <= 16, "enumeration is exponential in m");
    let (p, c, a, b) = (prob.p(), prob.c(), prob.a_in(), prob.b_in());
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(p * 2.0));
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-c));
        for (j, &i) in active.iter().enumerate() {
            for col in 0..n {
                kkt[(n + j, col)] = a[(i, col)];
                kkt[(col, n + j)] = a[(i, col)];
            }
            rhs[n + j] = b[i];
        }
        let lu = kkt.clone().lu();
        let Some(sol) = lu.solve(&rhs) else { continue };
        // Reject near-singular systems (dependent active rows).
        let residual = (&kkt * &sol - &rhs).amax();
        if !sol.iter().all(|v| v.is_finite()) || residual > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let u = sol.rows(0, n).into_owned();
        let mut lambda = DVector::zeros(m);
        for (j, &i) in active.iter().enumerate() {
            lambda[i] = sol[n + j];
        }
        let scale = 1.0 + b.amax();
        let primal_ok = (a * &u - b).iter().all(|v| *v <= 1e-10 * scale);
        let dual_ok = lambda.iter().all(|v| *v >= -1e-10 * (1.0 + lambda.amax()));
        if primal_ok && dual_ok {
            let f = prob.objective(&u);
            if best.as_ref().is_none_or(|(fb, _, _)| f < *fb) {
                best = Some((f, u, lambda));
            }
        }
    }
    best.map(|(_, u, l)| (u, l))
}

/// Strictly convex problem with a known interior point, so it is feasible.
/// Some constraints are made active at the unconstrained minimizer's side
/// by drawing them with small slack.
pub fn random_feasible_qp<R: Rng>(rng: &mut R, n: usize, m: usize) -> QpProblem {
    let mut uniform = |r: usize, c: usize, lo: f64, hi: f64| {
        DMatrix::<f64>::from_fn(r, c, |_, _| rng.gen_range(lo..hi))
    };
    let mfac = uniform(n, n, -1.0, 1.0);
    let p = mfac.transpose() * &mfac + DMatrix::identity(n, n) * 0.1;
    let p = (&p + p.transpose()) * 0.5;
    let c = uniform(n, 1, -3.0, 3.0).column(0).into_owned();
    let a = uniform(m, n, -1.0, 1.0);
    let interior = uniform(n, 1, -0.5, 0.5).column(0).into_owned();
    let slack = uniform(m, 1, 0.01, 1.0).column(0).into_owned();
    let b = &a * &interior + slack;
    QpProblem::new(p, c, a, b).unwrap()
}

/// Constraints `lo <= u_i <= hi` for every variable.
pub fn box_rows(n: usize, lo: f64, hi: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::zeros(2 * n, n);
    let mut b = DVector::zeros(2 * n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        b[i] = hi;
        a[(n + i, i)] = -1.0;
        b[n + i] = -lo;
    }
    (a, b)
}
