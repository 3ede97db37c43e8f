//! Condensed MPC for capture-point tracking.
//!
//! The controller model has state `[p_x, p_y, xi_x, xi_y]` (CoM position and
//! capture point per axis) and input `[v_ref_x, v_ref_y]`:
//!
//! ```text
//! p'  = omega * xi + v_ref
//! xi' = K * omega * p
//! ```
//!
//! After exact zero-order-hold discretization the future states are
//! eliminated with `X = F x0 + G U`, leaving a dense QP in the stacked input
//! sequence only.

use nalgebra::{DMatrix, DVector, Matrix4, Matrix4x2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::VlipParams;
use crate::qp::QpProblem;

pub const STATE_DIM: usize = 4;
pub const INPUT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("sample time must be positive and finite (got {0} s)")]
    InvalidTimestep(f64),
    #[error("prediction horizon must be at least 1")]
    EmptyHorizon,
    #[error("invalid weight {name}: {reason}")]
    InvalidWeight { name: &'static str, reason: String },
    #[error("invalid state-space parameters: {0}")]
    InvalidModel(String),
    #[error("condensed Hessian is not positive definite")]
    NotPositiveDefinite,
}

/// Continuous-time capture-point model `x' = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpStateSpace {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    omega: f64,
    gains: [f64; 2],
}

impl CpStateSpace {
    /// Builds the model from a natural frequency and per-axis gains.
    /// A zero gain is allowed here and freezes that axis' capture point.
    pub fn from_parts(omega: f64, gains: [f64; 2]) -> Result<Self, MpcError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(MpcError::InvalidModel(format!(
                "natural frequency must be positive, got {omega}"
            )));
        }
        if gains.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(MpcError::InvalidModel(format!(
                "capture-point gains must be non-negative, got {gains:?}"
            )));
        }
        let mut a = Matrix4::zeros();
        let mut b = Matrix4x2::zeros();
        for axis in 0..2 {
            a[(axis, 2 + axis)] = omega;
            a[(2 + axis, axis)] = gains[axis] * omega;
            b[(axis, axis)] = 1.0;
        }
        Ok(Self { a, b, omega, gains })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gains(&self) -> [f64; 2] {
        self.gains
    }
}

pub fn build_state_space(params: &VlipParams) -> CpStateSpace {
    CpStateSpace::from_parts(
        params.natural_frequency(),
        [params.gain_x(), params.gain_y()],
    )
    .expect("validated parameters give a valid model")
}

/// Exact ZOH pair `x[k+1] = Ad x[k] + Bd u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub ad: Matrix4<f64>,
    pub bd: Matrix4x2<f64>,
    pub dt_s: f64,
}

/// sinh(x)/x and (cosh(x) - 1)/x^2, accurate near zero.
fn hyperbolic_kernels(x: f64) -> (f64, f64) {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        (
            1.0 + x2 / 6.0 + x2 * x2 / 120.0,
            0.5 + x2 / 24.0 + x2 * x2 / 720.0,
        )
    } else {
        let half = (0.5 * x).sinh();
        (x.sinh() / x, 2.0 * half * half / (x * x))
    }
}

/// Discretizes per axis in closed form.
///
/// Each axis block `M = [[0, w], [K w, 0]]` satisfies `M^2 = K w^2 I`, so with
/// `l = w sqrt(K)`:
///
/// ```text
/// exp(M t)            = cosh(l t) I + sinh(l t)/l M
/// int_0^t exp(M s) ds = sinh(l t)/l I + (cosh(l t) - 1)/l^2 M
/// ```
///
/// The kernels are evaluated by series near `l t = 0`, which covers `K = 0`.
pub fn discretize(ss: &CpStateSpace, dt_s: f64) -> Result<DiscreteModel, MpcError> {
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(MpcError::InvalidTimestep(dt_s));
    }
    let mut ad = Matrix4::zeros();
    let mut bd = Matrix4x2::zeros();
    let w = ss.omega;
    for axis in 0..2 {
        let k = ss.gains[axis];
        let x = w * k.sqrt() * dt_s;
        let (sinch, coshm1) = hyperbolic_kernels(x);
        let ch = 1.0 + x * x * coshm1;
        let (p, xi) = (axis, 2 + axis);
        ad[(p, p)] = ch;
        ad[(xi, xi)] = ch;
        ad[(p, xi)] = w * dt_s * sinch;
        ad[(xi, p)] = k * w * dt_s * sinch;
        // B routes the input into the position row only.
        bd[(p, axis)] = dt_s * sinch;
        bd[(xi, axis)] = k * w * dt_s * dt_s * coshm1;
    }
    Ok(DiscreteModel { ad, bd, dt_s })
}

/// Stacked prediction `X = F x0 + G U` over `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub horizon: usize,
}

pub fn build_prediction(
    dm: &DiscreteModel,
    horizon: usize,
) -> Result<PredictionMatrices, MpcError> {
    if horizon == 0 {
        return Err(MpcError::EmptyHorizon);
    }
    let (nx, nu) = (STATE_DIM, INPUT_DIM);
    let mut f = DMatrix::zeros(nx * (horizon + 1), nx);
    let mut g = DMatrix::zeros(nx * (horizon + 1), nu * horizon);

    // powers[k] = Ad^k, impulse[k] = Ad^k Bd
    let mut powers = Vec::with_capacity(horizon + 1);
    powers.push(Matrix4::identity());
    for k in 1..=horizon {
        powers.push(dm.ad * powers[k - 1]);
    }
    let impulse: Vec<Matrix4x2<f64>> = powers.iter().map(|p| p * dm.bd).collect();

    for i in 0..=horizon {
        f.fixed_view_mut::<4, 4>(nx * i, 0).copy_from(&powers[i]);
        for j in 0..i {
            g.fixed_view_mut::<4, 2>(nx * i, nu * j)
                .copy_from(&impulse[i - 1 - j]);
        }
    }
    Ok(PredictionMatrices { f, g, horizon })
}

/// Diagonal tracking weights and the input box bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpWeights {
    /// Diagonal of Q over `[p_x, p_y, xi_x, xi_y]`.
    pub q_state: [f64; 4],
    /// Diagonal of R over `[v_ref_x, v_ref_y]`.
    pub r_input: [f64; 2],
    /// Each input entry is kept in `[-u_bound, u_bound]` [m/s].
    pub u_bound_mps: f64,
}

impl Default for QpWeights {
    fn default() -> Self {
        Self {
            q_state: [100.0, 100.0, 0.1, 0.1],
            r_input: [50.0, 55.0],
            u_bound_mps: 0.5,
        }
    }
}

impl QpWeights {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.q_state.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(MpcError::InvalidWeight {
                name: "q_state",
                reason: format!(
                    "entries must be finite and non-negative, got {:?}",
                    self.q_state
                ),
            });
        }
        if self.r_input.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(MpcError::InvalidWeight {
                name: "r_input",
                reason: format!(
                    "entries must be finite and positive, got {:?}",
                    self.r_input
                ),
            });
        }
        if !(self.u_bound_mps.is_finite() && self.u_bound_mps > 0.0) {
            return Err(MpcError::InvalidWeight {
                name: "u_bound_mps",
                reason: format!("must be finite and positive, got {}", self.u_bound_mps),
            });
        }
        Ok(())
    }
}

/// Dense QP `min u'Pu + c'u  s.t.  A_in u <= b_in`, plus the constant that
/// turns its objective back into the stacked tracking cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub problem: QpProblem,
    /// Stacked cost at `u = 0`.
    pub constant: f64,
}

impl CondensedQp {
    /// Stacked tracking cost `sum (x_k - x_d)' Q (x_k - x_d) + u_k' R u_k` at `u`.
    pub fn tracking_cost(&self, u: &DVector<f64>) -> f64 {
        self.problem.objective(u) + self.constant
    }
}

/// `(diag(Q) repeated N+1 times, diag(R) repeated N times)`
fn stacked_weights(w: &QpWeights, horizon: usize) -> (DVector<f64>, DVector<f64>) {
    let q = DVector::from_iterator(
        STATE_DIM * (horizon + 1),
        w.q_state
            .iter()
            .copied()
            .cycle()
            .take(STATE_DIM * (horizon + 1)),
    );
    let r = DVector::from_iterator(
        INPUT_DIM * horizon,
        w.r_input.iter().copied().cycle().take(INPUT_DIM * horizon),
    );
    (q, r)
}

fn box_constraints(n: usize, bound: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        a[(n + i, i)] = -1.0;
    }
    (a, DVector::from_element(2 * n, bound))
}

/// Condenses the tracking problem.
///
/// With stacked weights `Qb`, `Rb`:
///
/// ```text
/// P = G' Qb G + Rb
/// c = 2 G' Qb F (x0 - x_d)
/// ```
///
/// which is exact when the reference is an equilibrium of the model (the
/// origin, in practice); `x0 = x_d` then yields `c = 0`.
pub fn build_qp(
    pm: &PredictionMatrices,
    w: &QpWeights,
    x0: &Vector4<f64>,
    xd: &Vector4<f64>,
) -> Result<CondensedQp, MpcError> {
    CondensedMpc::from_prediction(pm.clone(), *w)?.qp_for(x0, xd)
}

/// Everything in the condensed QP that does not depend on the measured state,
/// precomputed once for use at every control tick.
#[derive(Debug, Clone)]
pub struct CondensedMpc {
    prediction: PredictionMatrices,
    weights: QpWeights,
    hessian: DMatrix<f64>,
    /// 2 G' Qb F
    linear_map: DMatrix<f64>,
    /// F' Qb F
    free_cost: DMatrix<f64>,
    a_in: DMatrix<f64>,
    b_in: DVector<f64>,
}

impl CondensedMpc {
    pub fn new(dm: &DiscreteModel, horizon: usize, weights: QpWeights) -> Result<Self, MpcError> {
        Self::from_prediction(build_prediction(dm, horizon)?, weights)
    }

    pub fn from_prediction(
        prediction: PredictionMatrices,
        weights: QpWeights,
    ) -> Result<Self, MpcError> {
        weights.validate()?;
        let (q, r) = stacked_weights(&weights, prediction.horizon);
        let (f, g) = (&prediction.f, &prediction.g);

        let qg = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| q[i] * g[(i, j)]);
        let qf = DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| q[i] * f[(i, j)]);
        let mut hessian = g.transpose() * &qg;
        for i in 0..r.len() {
            hessian[(i, i)] += r[i];
        }
        // Exact symmetry; the products above agree only to rounding.
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        if hessian.clone().cholesky().is_none() {
            return Err(MpcError::NotPositiveDefinite);
        }
        let linear_map = 2.0 * g.transpose() * &qf;
        let free_cost = f.transpose() * &qf;
        let (a_in, b_in) = box_constraints(g.ncols(), weights.u_bound_mps);
        Ok(Self {
            prediction,
            weights,
            hessian,
            linear_map,
            free_cost,
            a_in,
            b_in,
        })
    }

    pub fn prediction(&self) -> &PredictionMatrices {
        &self.prediction
    }

    pub fn weights(&self) -> &QpWeights {
        &self.weights
    }

    pub fn horizon(&self) -> usize {
        self.prediction.horizon
    }

    pub fn qp_for(&self, x0: &Vector4<f64>, xd: &Vector4<f64>) -> Result<CondensedQp, MpcError> {
        let err = DVector::from_column_slice((x0 - xd).as_slice());
        let c = &self.linear_map * &err;
        let constant = (err.transpose() * &self.free_cost * &err)[(0, 0)];
        let problem = QpProblem::new(
            self.hessian.clone(),
            c,
            self.a_in.clone(),
            self.b_in.clone(),
        )
        .map_err(|e| MpcError::InvalidModel(e.to_string()))?;
        Ok(CondensedQp { problem, constant })
    }
}
