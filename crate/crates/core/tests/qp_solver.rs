mod common;

use common::{active_set_oracle, box_rows, random_feasible_qp};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thrustwalk::qp::{kkt_residuals, solve, QpProblem, QpStatus};

#[test]
fn matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240501);
    let mut worst_u = 0.0f64;
    let mut worst_obj = 0.0f64;
    for trial in 0..500 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(0..=8);
        let prob = random_feasible_qp(&mut rng, n, m);
        let (u_ref, _) = active_set_oracle(&prob).expect("feasible by construction");
        let sol = solve(&prob, 1e-9, 50).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "trial {trial}: {prob:?}");
        assert!(sol.kkt.max() < 1e-8, "trial {trial}: {:?}", sol.kkt);
        worst_u = worst_u.max((&sol.u_star - &u_ref).amax());
        worst_obj = worst_obj.max((sol.objective - prob.objective(&u_ref)).abs());
    }
    assert!(worst_u < 1e-6, "u error {worst_u:e}");
    assert!(worst_obj < 1e-8, "objective error {worst_obj:e}");
}

#[test]
fn box_constrained_problems_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let base = random_feasible_qp(&mut rng, 4, 0);
        let (a, b) = box_rows(4, -0.3, 0.3);
        let prob = QpProblem::new(base.p().clone(), base.c().clone(), a, b).unwrap();
        let (u_ref, lambda_ref) = active_set_oracle(&prob).unwrap();
        let sol = solve(&prob, 1e-9, 50).unwrap();
        assert!(sol.is_optimal());
        assert!((&sol.u_star - &u_ref).amax() < 1e-6);
        assert!((&sol.lambda - &lambda_ref).amax() < 1e-6);
    }
}

#[test]
fn unconstrained_solution_is_half_inverse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=8 {
        let prob = random_feasible_qp(&mut rng, n, 0);
        let expected = -0.5 * prob.p().clone().try_inverse().unwrap() * prob.c();
        let sol = solve(&prob, 1e-9, 50).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((&sol.u_star - &expected).amax() < 1e-10);
    }
}

#[test]
fn infeasible_problem_is_reported() {
    // u1 + u2 <= -1 together with u1 >= 0, u2 >= 0.
    let prob = QpProblem::new(
        DMatrix::identity(2, 2),
        dvector![1.0, 1.0],
        dmatrix![1.0, 1.0; -1.0, 0.0; 0.0, -1.0],
        dvector![-1.0, 0.0, 0.0],
    )
    .unwrap();
    assert!(active_set_oracle(&prob).is_none());
    assert_eq!(solve(&prob, 1e-9, 50).unwrap().status, QpStatus::Infeasible);
}

#[test]
fn perturbing_the_optimum_raises_a_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let prob = random_feasible_qp(&mut rng, 3, 5);
        let sol = solve(&prob, 1e-9, 50).unwrap();
        let base = kkt_residuals(&prob, &sol.u_star, &sol.lambda).max();
        assert!(base < 1e-8);
        for i in 0..3 {
            for sign in [1.0, -1.0] {
                let mut u = sol.u_star.clone();
                u[i] += sign * 1e-3;
                let r = kkt_residuals(&prob, &u, &sol.lambda);
                assert!(r.max() > 1e-4, "{r:?}");
                // Feasible moves never improve the objective.
                if r.primal_feasibility == 0.0 {
                    assert!(prob.objective(&u) >= sol.objective - 1e-12);
                }
            }
        }
    }
}

#[test]
fn newton_steps_contract_linear_residuals_exactly() {
    // Both residuals are affine in (u, s, lambda), so a step of length alpha
    // along the Newton direction scales them by (1 - alpha).
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=8);
        let prob = random_feasible_qp(&mut rng, n, m);
        let sol = solve(&prob, 1e-9, 50).unwrap();
        for w in sol.history.windows(2) {
            let shrink = 1.0 - w[1].step;
            let expect_p = shrink * w[0].primal_residual;
            let expect_d = shrink * w[0].dual_residual;
            assert!((w[1].primal_residual - expect_p).abs() <= 1e-12 + 1e-8 * w[0].primal_residual);
            assert!((w[1].dual_residual - expect_d).abs() <= 1e-11 + 1e-8 * w[0].dual_residual);
        }
    }
}

#[test]
fn barrier_merit_decreases_on_box_problems() {
    // objective - mu * sum(ln s) over accepted iterations, for the box
    // constraints the MPC produces. With general constraints the merit can
    // rise when sum(ln s) > 0 and mu shrinks, so it is not checked there.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut steps = 0;
    for _ in 0..300 {
        let n = rng.gen_range(1..=6);
        let base = random_feasible_qp(&mut rng, n, 0);
        let (a, b) = box_rows(n, -0.3, 0.3);
        let prob = QpProblem::new(base.p().clone(), base.c().clone(), a, b).unwrap();
        let sol = solve(&prob, 1e-9, 50).unwrap();
        let merit: Vec<f64> = sol
            .history
            .iter()
            .map(|h| h.objective - h.mu * h.log_slack_sum)
            .collect();
        for w in merit.windows(2) {
            steps += 1;
            assert!(w[1] <= w[0] + 1e-12, "{:?}", sol.history);
        }
    }
    assert!(steps > 500);
}

proptest! {
    #![proptest_config(ProptestConfig {
        rng_seed: RngSeed::Fixed(64),
        ..ProptestConfig::with_cases(64)
    })]

    #[test]
    fn scaling_covariance(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(0..=6);
        let prob = random_feasible_qp(&mut rng, n, m);
        let a = solve(&prob, 1e-10, 50).unwrap();
        let b = solve(&prob.scaled(alpha), 1e-10, 50).unwrap();
        prop_assert!(a.is_optimal() && b.is_optimal());
        prop_assert!((&a.u_star - &b.u_star).amax() < 1e-8);
        let scaled: DVector<f64> = &a.lambda * alpha;
        prop_assert!((&scaled - &b.lambda).amax() < 1e-6 * (1.0 + scaled.amax()));
    }
}
