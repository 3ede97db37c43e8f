//! Closed-loop trot-in-place simulation.
//!
//! The plant is the reduced pendulum of [`crate::model`], propagated exactly
//! between control ticks. Each tick the controller measures the world CoM
//! position and the capture point, condenses and solves the tracking QP, and
//! keeps the first input as a reference-velocity command. The command only
//! reaches the plant through foot placement: at every step boundary the swing
//! foot lands on the capture point computed against that reference velocity.

mod sweep;
mod trace;

pub use sweep::{thrust_sweep, SweepRow, SweepRun, SweepSummary, SETTLING_BAND_M};
pub use trace::{read_trace_csv, write_trace_csv, SimRecord, TickStatus, TRACE_COLUMNS};

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{leg_ik, BodyPose, KinematicsError, LegJointAngles, LinkLengths};
use crate::model::{
    desired_capture_point, integrate_axis, AxisState, ModelError, PlanarState, Side, VlipParams,
};
use crate::mpc::{build_state_space, discretize, CondensedMpc, MpcError, QpWeights};
use crate::qp::{self, QpSettings, QpStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid gait configuration: {0}")]
    InvalidGait(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("QP failed at tick {tick} (t = {t_s} s): {reason}")]
    QpFailure {
        tick: usize,
        t_s: f64,
        reason: String,
        /// The offending problem in the solver's text format.
        problem: String,
    },
}

impl SimError {
    /// Failures of the numerics, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimError::QpFailure { .. } | SimError::Model(ModelError::Diverged { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitConfig {
    pub step_period_s: f64,
    pub control_dt_s: f64,
    pub sim_duration_s: f64,
    /// Reference CoM velocity the capture point is computed against.
    pub v_ref_mps: [f64; 2],
    /// Lateral stance half-width added to frontal foot placements, signed by the new stance side.
    pub foot_lateral_offset_m: f64,
    /// Largest capture-point step per axis.
    pub foot_bound_m: f64,
    /// CoM position relative to the initial stance foot, which sits at the world origin.
    pub initial_com_offset_m: [f64; 2],
    pub initial_com_velocity_mps: [f64; 2],
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            step_period_s: 0.3,
            control_dt_s: 0.01,
            sim_duration_s: 10.0,
            v_ref_mps: [0.0, 0.0],
            foot_lateral_offset_m: 0.08,
            foot_bound_m: 0.3,
            initial_com_offset_m: [0.05, 0.0],
            initial_com_velocity_mps: [0.0, 0.0],
        }
    }
}

impl GaitConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("step_period_s", self.step_period_s),
            ("control_dt_s", self.control_dt_s),
            ("sim_duration_s", self.sim_duration_s),
            ("foot_bound_m", self.foot_bound_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidGait(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.control_dt_s > self.step_period_s {
            return Err(SimError::InvalidGait(format!(
                "control_dt_s ({}) must not exceed step_period_s ({})",
                self.control_dt_s, self.step_period_s
            )));
        }
        let finite = self
            .v_ref_mps
            .iter()
            .chain(&self.initial_com_offset_m)
            .chain(&self.initial_com_velocity_mps)
            .chain(std::iter::once(&self.foot_lateral_offset_m))
            .all(|v| v.is_finite());
        if !finite {
            return Err(SimError::InvalidGait("non-finite entry".into()));
        }
        Ok(())
    }

    /// Number of control ticks (and trace records) in a run.
    pub fn num_ticks(&self) -> usize {
        (self.sim_duration_s / self.control_dt_s).round() as usize
    }
}

/// QP controller settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// When false the foot is placed on the plain capture point (no QP).
    pub use_qp: bool,
    pub horizon: usize,
    pub weights: QpWeights,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            use_qp: true,
            horizon: 50,
            weights: QpWeights::default(),
            tol: 1e-9,
            max_iter: 50,
        }
    }
}

/// Outcome of a support exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    /// Pendulum state relative to the new stance foot.
    pub state: PlanarState,
    /// New foot position minus old foot position.
    pub foot_shift_m: [f64; 2],
    /// Per axis, whether the capture point was clipped to `foot_bound_m`.
    pub clamped: [bool; 2],
}

/// Support exchange using the gait's own reference velocity.
pub fn step_exchange(state: &PlanarState, params: &VlipParams, gait: &GaitConfig) -> Exchange {
    step_exchange_with_command(state, params, gait, gait.v_ref_mps)
}

/// Lands the swing foot on the desired capture point for `v_cmd` (clipped
/// to the foot bound), plus the lateral stance offset of the new stance
/// side, and re-expresses the CoM relative to it. Velocities carry over.
pub fn step_exchange_with_command(
    state: &PlanarState,
    params: &VlipParams,
    gait: &GaitConfig,
    v_cmd: [f64; 2],
) -> Exchange {
    let new_stance = state.stance.opposite();
    let gains = [params.gain_x(), params.gain_y()];
    let mut next = PlanarState {
        stance: new_stance,
        ..*state
    };
    let mut foot_shift_m = [0.0; 2];
    let mut clamped = [false; 2];
    for axis in 0..2 {
        let s = state.axis(axis);
        let xi = desired_capture_point(s, v_cmd[axis], gains[axis], params);
        let bounded = xi.clamp(-gait.foot_bound_m, gait.foot_bound_m);
        clamped[axis] = bounded != xi;
        let lateral = if axis == 1 {
            new_stance.lateral_sign() * gait.foot_lateral_offset_m
        } else {
            0.0
        };
        let offset = bounded + lateral;
        foot_shift_m[axis] = s.p_m + offset;
        *next.axis_mut(axis) = AxisState::new(-offset, s.v_mps);
    }
    Exchange {
        state: next,
        foot_shift_m,
        clamped,
    }
}

/// A support exchange that happened during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangeEvent {
    pub t_s: f64,
    pub stance: Side,
    pub foot_m: [f64; 2],
    pub clamped: [bool; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<SimRecord>,
    pub exchanges: Vec<ExchangeEvent>,
}

impl SimTrace {
    /// Largest |CoM position| per axis over each step interval, in order.
    pub fn step_envelopes(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        let mut current: Option<(usize, [f64; 2])> = None;
        for r in &self.records {
            let step = self
                .exchanges
                .iter()
                .filter(|e| e.t_s <= r.t_s + 1e-12)
                .count();
            let mag = [r.com_x_m.abs(), r.com_y_m.abs()];
            match &mut current {
                Some((s, env)) if *s == step => {
                    env[0] = env[0].max(mag[0]);
                    env[1] = env[1].max(mag[1]);
                }
                _ => {
                    if let Some((_, env)) = current.take() {
                        out.push(env);
                    }
                    current = Some((step, mag));
                }
            }
        }
        out.extend(current.map(|(_, env)| env));
        out
    }
}

fn axis_gains(params: &VlipParams) -> [f64; 2] {
    [params.gain_x(), params.gain_y()]
}

/// Capture-point measurement used as the controller state.
fn measured_capture_point(state: &PlanarState, params: &VlipParams, gait: &GaitConfig) -> [f64; 2] {
    let gains = axis_gains(params);
    [0, 1].map(|i| desired_capture_point(state.axis(i), gait.v_ref_mps[i], gains[i], params))
}

pub fn run_closed_loop(
    params: &VlipParams,
    gait: &GaitConfig,
    controller: &ControllerConfig,
) -> Result<SimTrace, SimError> {
    gait.validate()?;
    let dt = gait.control_dt_s;
    let mpc = if controller.use_qp {
        let dm = discretize(&build_state_space(params), dt)?;
        Some(CondensedMpc::new(
            &dm,
            controller.horizon,
            controller.weights,
        )?)
    } else {
        None
    };
    let qp_settings = QpSettings {
        tol: controller.tol,
        max_iter: controller.max_iter,
        ..QpSettings::default()
    };

    let mut state = PlanarState {
        x: AxisState::new(
            gait.initial_com_offset_m[0],
            gait.initial_com_velocity_mps[0],
        ),
        y: AxisState::new(
            gait.initial_com_offset_m[1],
            gait.initial_com_velocity_mps[1],
        ),
        stance: Side::Left,
    };
    let mut foot = [0.0f64; 2];
    let mut next_exchange = 1usize;
    let n_ticks = gait.num_ticks();
    let mut records = Vec::with_capacity(n_ticks);
    let mut exchanges = Vec::new();

    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        let xi = measured_capture_point(&state, params, gait);
        let com = [foot[0] + state.x.p_m, foot[1] + state.y.p_m];

        let (u, status, iterations) = match &mpc {
            Some(mpc) => {
                let x0 = Vector4::new(com[0], com[1], xi[0], xi[1]);
                let qp = mpc.qp_for(&x0, &Vector4::zeros())?;
                let sol =
                    qp::solve_with(&qp.problem, &qp_settings).map_err(|e| SimError::QpFailure {
                        tick,
                        t_s: t,
                        reason: e.to_string(),
                        problem: qp::write_problem(&qp.problem),
                    })?;
                if sol.status != QpStatus::Optimal {
                    return Err(SimError::QpFailure {
                        tick,
                        t_s: t,
                        reason: format!(
                            "status {} after {} iterations (KKT residual {:e})",
                            sol.status.as_str(),
                            sol.iterations,
                            sol.kkt.max()
                        ),
                        problem: qp::write_problem(&qp.problem),
                    });
                }
                (
                    [sol.u_star[0], sol.u_star[1]],
                    TickStatus::Optimal,
                    sol.iterations,
                )
            }
            None => ([0.0, 0.0], TickStatus::Disabled, 0),
        };

        records.push(SimRecord {
            t_s: t,
            com_x_m: com[0],
            com_y_m: com[1],
            com_vx_mps: state.x.v_mps,
            com_vy_mps: state.y.v_mps,
            xi_x_m: xi[0],
            xi_y_m: xi[1],
            u_x_mps: u[0],
            u_y_mps: u[1],
            stance: state.stance,
            foot_x_m: foot[0],
            foot_y_m: foot[1],
            thrust_n: params.thrust_n(),
            qp_status: status,
            qp_iterations: iterations,
        });

        // Propagate to the next tick, exchanging support at step boundaries.
        let v_cmd = [gait.v_ref_mps[0] + u[0], gait.v_ref_mps[1] + u[1]];
        let t_end = (tick + 1) as f64 * dt;
        let mut t_cur = t;
        loop {
            let t_boundary = next_exchange as f64 * gait.step_period_s;
            if t_boundary > t_end + 1e-9 {
                break;
            }
            let t_b = t_boundary.clamp(t_cur, t_end);
            advance(&mut state, params, t_b - t_cur)?;
            t_cur = t_b;
            let ex = step_exchange_with_command(&state, params, gait, v_cmd);
            foot[0] += ex.foot_shift_m[0];
            foot[1] += ex.foot_shift_m[1];
            state = ex.state;
            exchanges.push(ExchangeEvent {
                t_s: t_b,
                stance: state.stance,
                foot_m: foot,
                clamped: ex.clamped,
            });
            next_exchange += 1;
        }
        advance(&mut state, params, t_end - t_cur)?;
    }

    Ok(SimTrace { records, exchanges })
}

fn advance(state: &mut PlanarState, params: &VlipParams, dt: f64) -> Result<(), ModelError> {
    let dt = dt.max(0.0);
    state.x = integrate_axis(state.x, params, dt)?;
    state.y = integrate_axis(state.y, params, dt)?;
    Ok(())
}

/// Joint angles of both legs for one trace sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegJointTargets {
    pub left: LegJointAngles,
    pub right: LegJointAngles,
}

impl LegJointTargets {
    pub fn get(&self, side: Side) -> LegJointAngles {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

/// Where a leg's foot rests in the nominal posture: on the ground directly
/// below the hip line, for a body at `body`.
pub fn nominal_foot_target(body: &BodyPose, links: &LinkLengths, side: Side) -> Vector3<f64> {
    let lateral = links.l1(side).y + links.l2(side).y + links.l3(side).y;
    let offset = body.rotation() * Vector3::new(0.0, lateral, 0.0);
    Vector3::new(body.position.x + offset.x, body.position.y + offset.y, 0.0)
}

/// Maps a trace sample to joint angles with the body above the CoM.
///
/// The body sits at `(com_x, com_y, pose.position.z)` with `pose`'s
/// orientation; the stance foot is on the ground at the recorded foot
/// position and the swing foot at its nominal target.
pub fn foot_targets_to_joints(
    record: &SimRecord,
    pose: &BodyPose,
    links: &LinkLengths,
) -> Result<LegJointTargets, KinematicsError> {
    let body = BodyPose::from_rotation(
        Vector3::new(record.com_x_m, record.com_y_m, pose.position.z),
        *pose.rotation(),
    );
    let target = |side: Side| {
        if side == record.stance {
            Vector3::new(record.foot_x_m, record.foot_y_m, 0.0)
        } else {
            nominal_foot_target(&body, links, side)
        }
    };
    Ok(LegJointTargets {
        left: leg_ik(&target(Side::Left), &body, links, Side::Left)?,
        right: leg_ik(&target(Side::Right), &body, links, Side::Right)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::fk_chain;
    use crate::model::{capture_point, orbital_energy};
    use approx::assert_relative_eq;

    fn planar(px: f64, vx: f64) -> PlanarState {
        PlanarState {
            x: AxisState::new(px, vx),
            y: AxisState::default(),
            stance: Side::Left,
        }
    }

    #[test]
    fn exchange_at_rest_places_foot_under_com() {
        let params = VlipParams::default();
        let gait = GaitConfig {
            foot_lateral_offset_m: 0.0,
            ..GaitConfig::default()
        };
        let ex = step_exchange(&planar(0.02, 0.0), &params, &gait);
        assert_eq!(ex.state.x.p_m, 0.0);
        assert_eq!(ex.foot_shift_m[0], 0.02);
        assert_eq!(ex.state.stance, Side::Right);
    }

    #[test]
    fn exchange_steps_to_capture_point() {
        let params = VlipParams::default();
        let ex = step_exchange(&planar(0.0, 0.5), &params, &GaitConfig::default());
        assert_relative_eq!(ex.state.x.p_m, -0.112881, epsilon = 1e-6);
        assert_eq!(ex.state.x.v_mps, 0.5);
        assert!(orbital_energy(ex.state.x, &params).abs() < 1e-15);
        assert_eq!(ex.clamped, [false, false]);
        // New stance is the right foot: lateral placement on the -y side.
        assert_eq!(ex.state.y.p_m, 0.08);
    }

    #[test]
    fn exchange_clamps_long_steps() {
        let params = VlipParams::default();
        let gait = GaitConfig::default();
        let v = 2.0 * gait.foot_bound_m / capture_point(AxisState::new(0.0, 1.0), &params);
        let ex = step_exchange(&planar(0.0, v), &params, &gait);
        assert_eq!(ex.state.x.p_m, -gait.foot_bound_m);
        assert_eq!(ex.clamped, [true, false]);
    }

    #[test]
    fn gait_validation() {
        let mut g = GaitConfig {
            control_dt_s: 0.5,
            ..GaitConfig::default()
        };
        assert!(matches!(g.validate(), Err(SimError::InvalidGait(_))));
        g = GaitConfig::default();
        g.sim_duration_s = -1.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn one_record_per_tick() {
        let gait = GaitConfig {
            sim_duration_s: 0.5,
            ..GaitConfig::default()
        };
        let trace =
            run_closed_loop(&VlipParams::default(), &gait, &ControllerConfig::default()).unwrap();
        assert_eq!(trace.records.len(), 50);
        assert!(trace.records.windows(2).all(|w| w[1].t_s > w[0].t_s));
        assert_eq!(trace.exchanges.len(), 1);
    }

    #[test]
    fn nominal_record_gives_nominal_angles() {
        let links = LinkLengths::default();
        let pose = BodyPose::upright(Vector3::new(0.0, 0.0, 0.5));
        let lateral = links.l1(Side::Left).y + links.l2(Side::Left).y + links.l3(Side::Left).y;
        let record = SimRecord {
            foot_y_m: lateral,
            ..SimRecord::default()
        };
        let q = foot_targets_to_joints(&record, &pose, &links).unwrap();
        let nominal = leg_ik(
            &nominal_foot_target(&pose, &links, Side::Left),
            &pose,
            &links,
            Side::Left,
        )
        .unwrap();
        assert!(q.left.max_abs_diff(&nominal) < 1e-12);
        assert!(q.left.gamma_h.abs() < 1e-12);
        // Mirror symmetry of the swing leg.
        assert!((q.right.phi_k - q.left.phi_k).abs() < 1e-12);
        assert!((q.right.gamma_h + q.left.gamma_h).abs() < 1e-12);
        for side in [Side::Left, Side::Right] {
            let foot = fk_chain(&pose, &q.get(side), &links, side).foot;
            assert!(foot.z.abs() < 1e-9);
        }
    }

    #[test]
    fn far_stance_foot_is_out_of_workspace() {
        let links = LinkLengths::default();
        let pose = BodyPose::upright(Vector3::new(0.0, 0.0, 0.5));
        let reach = links.max_hip_reach();
        let record = SimRecord {
            foot_x_m: reach,
            foot_y_m: 0.08,
            ..SimRecord::default()
        };
        assert!(matches!(
            foot_targets_to_joints(&record, &pose, &links),
            Err(KinematicsError::OutOfWorkspace { .. })
        ));
    }
}
