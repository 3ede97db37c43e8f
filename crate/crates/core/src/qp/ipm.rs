//! Mehrotra predictor-corrector primal-dual interior-point method.
//!
//! With slacks `s = b - A u`, multipliers `lambda` and `H = 2P`, each
//! iteration takes a Newton step on
//!
//! ```text
//! H u + c + A' lambda = 0
//! A u + s - b         = 0
//! s .* lambda         = sigma * mu
//! ```
//!
//! reduced to the normal system `(H + A' diag(lambda ./ s) A) du = rhs`,
//! which is dense symmetric positive definite and factored by Cholesky.
//! Once the iterates settle, the constraints with `lambda > s` are taken as
//! the active set and the equality-constrained KKT system is solved
//! directly; that polished point replaces the interior iterate when it is a
//! valid, more accurate KKT point.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{kkt_residuals, KktResiduals, QpError, QpProblem, QpSolution, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Absolute bound on every KKT residual for an `Optimal` verdict.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the boundary taken by each step.
    pub step_fraction: f64,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            step_fraction: 0.995,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationInfo {
    pub iteration: usize,
    /// Average complementarity `s' lambda / m`.
    pub mu: f64,
    pub objective: f64,
    /// `|| A u + s - b ||_inf`
    pub primal_residual: f64,
    /// `|| 2 P u + c + A' lambda ||_inf`
    pub dual_residual: f64,
    /// `sum(ln s)` over the slacks; the log-barrier is `-mu` times this.
    pub log_slack_sum: f64,
    pub step: f64,
}

/// Solves with default settings apart from `tol` and `max_iter`.
pub fn solve(prob: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    solve_with(
        prob,
        &QpSettings {
            tol,
            max_iter,
            ..QpSettings::default()
        },
    )
}

/// Row-compressed copy of `A_in`; MPC box constraints have one entry per row.
struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
    n: usize,
}

impl SparseRows {
    fn new(a: &DMatrix<f64>) -> Self {
        let rows = (0..a.nrows())
            .map(|i| {
                (0..a.ncols())
                    .filter(|&j| a[(i, j)] != 0.0)
                    .map(|j| (j, a[(i, j)]))
                    .collect()
            })
            .collect();
        Self { rows, n: a.ncols() }
    }

    fn mul(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(j, a)| a * u[j]).sum::<f64>()),
        )
    }

    fn tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (row, yi) in self.rows.iter().zip(y.iter()) {
            for &(j, a) in row {
                out[j] += a * yi;
            }
        }
        out
    }

    /// `m += A' diag(w) A`
    fn add_weighted_gram(&self, w: &DVector<f64>, m: &mut DMatrix<f64>) {
        for (row, wi) in self.rows.iter().zip(w.iter()) {
            for &(j, aj) in row {
                for &(k, ak) in row {
                    m[(j, k)] += wi * aj * ak;
                }
            }
        }
    }
}

/// Largest `alpha` in (0, 1] keeping `x + alpha dx >= 0`.
fn max_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(xi, di)| -xi / di)
        .fold(1.0f64, f64::min)
}

pub fn solve_with(prob: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    let n = prob.num_vars();
    let m = prob.num_constraints();
    let hessian = prob.p() * 2.0;

    if m == 0 {
        let chol = hessian
            .clone()
            .cholesky()
            .ok_or(QpError::NotPositiveDefinite)?;
        let u = chol.solve(&(-prob.c()));
        let lambda = DVector::zeros(0);
        let kkt = kkt_residuals(prob, &u, &lambda);
        let status = if kkt.max() <= settings.tol {
            QpStatus::Optimal
        } else {
            QpStatus::MaxIterations
        };
        return Ok(QpSolution {
            objective: prob.objective(&u),
            u_star: u,
            lambda,
            status,
            iterations: 1,
            kkt,
            history: Vec::new(),
        });
    }

    let a = SparseRows::new(prob.a_in());
    let b = prob.b_in();
    let c = prob.c();
    let scale = 1.0 + c.amax() + hessian.amax();
    let a_scale = prob.a_in().amax().max(1.0);
    let b_scale = b.amax().max(1.0);

    let mut u = DVector::zeros(n);
    let mut s = (b - a.mul(&u)).map(|v| v.abs().max(1.0));
    let mut lambda = DVector::from_element(m, 1.0);
    let mut history = Vec::new();
    let mut status = QpStatus::MaxIterations;
    let mut iterations = 0;

    for iter in 0..=settings.max_iter {
        let kkt = kkt_residuals(prob, &u, &lambda);
        let r_d = &hessian * &u + c + a.tr_mul(&lambda);
        let r_p = a.mul(&u) + &s - b;
        let mu = s.dot(&lambda) / m as f64;
        if kkt.max() <= settings.tol && r_p.amax() <= settings.tol.max(1e-12) {
            status = QpStatus::Optimal;
            break;
        }

        // Farkas test: a normalized multiplier with A' y ~ 0 and b' y < 0
        // certifies that no u satisfies A u <= b.
        let lam_sum = lambda.sum();
        if lam_sum > 1e6 * scale {
            let y = &lambda / lam_sum;
            if a.tr_mul(&y).amax() <= 1e-8 * a_scale && b.dot(&y) < -1e-6 * b_scale {
                status = QpStatus::Infeasible;
                break;
            }
        }
        if iter == settings.max_iter {
            break;
        }
        iterations = iter + 1;

        let w = lambda.component_div(&s);
        let mut normal = hessian.clone();
        a.add_weighted_gram(&w, &mut normal);
        let Some(chol) = normal.cholesky() else {
            // Either P itself is indefinite, or the barrier weights have
            // become too ill-conditioned to factor; the polish step below
            // can still finish the latter from the current iterate.
            if hessian.clone().cholesky().is_none() {
                return Err(QpError::NotPositiveDefinite);
            }
            break;
        };

        // Solves the linearized system for a complementarity target `r_c`
        // (the desired value of -(s .* lambda + correction)).
        let newton = |r_c: &DVector<f64>| {
            // S^-1 (Lambda r_p - r_c)
            let t = (lambda.component_mul(&r_p) - r_c).component_div(&s);
            let du = chol.solve(&(-&r_d - a.tr_mul(&t)));
            let ds = -&r_p - a.mul(&du);
            let dl = (-r_c - lambda.component_mul(&ds)).component_div(&s);
            (du, ds, dl)
        };

        let r_c_aff = s.component_mul(&lambda);
        let (_, ds_aff, dl_aff) = newton(&r_c_aff);
        let alpha_aff = max_step(&s, &ds_aff).min(max_step(&lambda, &dl_aff));
        let mu_aff = (&s + alpha_aff * &ds_aff).dot(&(&lambda + alpha_aff * &dl_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let r_c = &r_c_aff + ds_aff.component_mul(&dl_aff) - DVector::from_element(m, sigma * mu);
        let (du, ds, dl) = newton(&r_c);
        let alpha =
            (settings.step_fraction * max_step(&s, &ds).min(max_step(&lambda, &dl))).min(1.0);

        u += alpha * &du;
        s += alpha * &ds;
        lambda += alpha * &dl;
        // Keep strictly interior despite rounding.
        s.apply(|v| *v = v.max(1e-300));
        lambda.apply(|v| *v = v.max(1e-300));

        history.push(IterationInfo {
            iteration: iterations,
            mu: s.dot(&lambda) / m as f64,
            objective: prob.objective(&u),
            primal_residual: (a.mul(&u) + &s - b).amax(),
            dual_residual: (&hessian * &u + c + a.tr_mul(&lambda)).amax(),
            log_slack_sum: s.iter().map(|v| v.ln()).sum(),
            step: alpha,
        });
    }

    let mut kkt = kkt_residuals(prob, &u, &lambda);
    if settings.polish && status != QpStatus::Infeasible {
        if let Some((pu, pl, pk)) = polish(prob, &hessian, &u, &lambda, &kkt) {
            u = pu;
            lambda = pl;
            kkt = pk;
            if kkt.max() <= settings.tol {
                status = QpStatus::Optimal;
            }
        }
    }

    Ok(QpSolution {
        objective: prob.objective(&u),
        u_star: u,
        lambda,
        status,
        iterations,
        kkt,
        history,
    })
}

/// Solves the KKT system on the active set guessed from the interior iterate.
fn polish(
    prob: &QpProblem,
    hessian: &DMatrix<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    current: &KktResiduals,
) -> Option<(DVector<f64>, DVector<f64>, KktResiduals)> {
    let n = prob.num_vars();
    let slack = prob.b_in() - prob.a_in() * u;
    let active: Vec<usize> = (0..prob.num_constraints())
        .filter(|&i| lambda[i] > slack[i])
        .collect();
    if active.len() > n {
        return None;
    }
    let k = active.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(hessian);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-prob.c()));
    for (r, &i) in active.iter().enumerate() {
        for j in 0..n {
            let aij = prob.a_in()[(i, j)];
            kkt[(n + r, j)] = aij;
            kkt[(j, n + r)] = aij;
        }
        rhs[n + r] = prob.b_in()[i];
    }
    let sol = kkt.lu().solve(&rhs)?;
    let pu = sol.rows(0, n).into_owned();
    let mut pl = DVector::zeros(prob.num_constraints());
    for (r, &i) in active.iter().enumerate() {
        if sol[n + r] < 0.0 {
            return None;
        }
        pl[i] = sol[n + r];
    }
    let pk = kkt_residuals(prob, &pu, &pl);
    if !pk.max().is_finite() || pk.max() > current.max() {
        return None;
    }
    Some((pu, pl, pk))
}
