//! Leg chain kinematics: body -> pelvis (frontal hip) -> hip (sagittal hip)
//! -> knee -> foot, plus the body-fixed thruster mount.
//!
//! Link vectors are given for the left leg in the body frame (x forward,
//! y left, z up); the right leg mirrors their lateral components. The lower
//! leg is a parallel linkage whose knee-to-foot vector depends on the knee
//! angle itself:
//!
//! ```text
//! l4 = [-l4a cos(phi_k), 0, -(l4b + l4a sin(phi_k))]
//! ```

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::model::Side;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("foot target {target:?} is outside the {side:?} leg workspace; nearest reachable target is {nearest:?}")]
    OutOfWorkspace {
        side: Side,
        target: [f64; 3],
        nearest: [f64; 3],
    },
    #[error("joint {joint} = {value} rad violates limits [{min}, {max}]")]
    JointLimit {
        joint: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid link geometry: {0}")]
    InvalidLinks(String),
    #[error("body rotation is not a proper rotation matrix (orthonormality error {orthogonality:e}, det {det})")]
    InvalidRotation { orthogonality: f64, det: f64 },
}

/// Constant link vectors of the left leg, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLengths {
    pub l1_body_to_pelvis: [f64; 3],
    pub l2_pelvis_to_hip: [f64; 3],
    pub l3_hip_to_knee: [f64; 3],
    pub l4a: f64,
    pub l4b: f64,
    pub lt_body_to_thruster: [f64; 3],
}

impl Default for LinkLengths {
    /// A plausible proportioning for a 0.6 m tall biped with the CoM near
    /// 0.5 m; not measured from hardware.
    fn default() -> Self {
        Self {
            l1_body_to_pelvis: [0.0, 0.05, -0.02],
            l2_pelvis_to_hip: [0.0, 0.03, -0.03],
            l3_hip_to_knee: [0.0, 0.0, -0.22],
            l4a: 0.04,
            l4b: 0.26,
            lt_body_to_thruster: [0.0, 0.12, 0.05],
        }
    }
}

impl LinkLengths {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.l4a.is_finite() && self.l4a > 0.0 && self.l4b.is_finite() && self.l4b > 0.0) {
            return Err(KinematicsError::InvalidLinks(format!(
                "l4a and l4b must be positive (got {}, {})",
                self.l4a, self.l4b
            )));
        }
        let vectors = [
            self.l1_body_to_pelvis,
            self.l2_pelvis_to_hip,
            self.l3_hip_to_knee,
            self.lt_body_to_thruster,
        ];
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(KinematicsError::InvalidLinks(
                "link vectors must be finite".into(),
            ));
        }
        Ok(())
    }

    fn mirrored(v: [f64; 3], side: Side) -> Vector3<f64> {
        Vector3::new(v[0], side.lateral_sign() * v[1], v[2])
    }

    pub fn l1(&self, side: Side) -> Vector3<f64> {
        Self::mirrored(self.l1_body_to_pelvis, side)
    }
    pub fn l2(&self, side: Side) -> Vector3<f64> {
        Self::mirrored(self.l2_pelvis_to_hip, side)
    }
    pub fn l3(&self, side: Side) -> Vector3<f64> {
        Self::mirrored(self.l3_hip_to_knee, side)
    }
    pub fn lt(&self, side: Side) -> Vector3<f64> {
        Self::mirrored(self.lt_body_to_thruster, side)
    }

    /// Knee-to-foot vector in the knee frame.
    pub fn l4(&self, phi_k: f64) -> Vector3<f64> {
        Vector3::new(
            -self.l4a * phi_k.cos(),
            0.0,
            -(self.l4b + self.l4a * phi_k.sin()),
        )
    }

    /// Centre and radius of the circle traced in the sagittal plane by the
    /// foot relative to the hip (before the hip pitch), as the knee turns.
    fn shank_circle(&self) -> ((f64, f64), f64) {
        // R_y(phi_k) * l4(phi_k) = [-l4a - l4b sin(phi_k), 0, -l4b cos(phi_k)]
        let c = (self.l3_hip_to_knee[0] - self.l4a, self.l3_hip_to_knee[2]);
        (c, self.l4b)
    }

    /// Longest hip-to-foot distance any knee angle can produce.
    pub fn max_hip_reach(&self) -> f64 {
        let ((cx, cz), r) = self.shank_circle();
        let sagittal = cx.hypot(cz) + r;
        sagittal.hypot(self.l3_hip_to_knee[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegJointAngles {
    /// Frontal hip angle [rad].
    pub gamma_h: f64,
    /// Sagittal hip angle [rad].
    pub phi_h: f64,
    /// Sagittal knee angle [rad].
    pub phi_k: f64,
}

impl LegJointAngles {
    pub const fn new(gamma_h: f64, phi_h: f64, phi_k: f64) -> Self {
        Self {
            gamma_h,
            phi_h,
            phi_k,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.gamma_h - other.gamma_h)
            .abs()
            .max((self.phi_h - other.phi_h).abs())
            .max((self.phi_k - other.phi_k).abs())
    }
}

/// Box limits on the three leg joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub gamma_h: [f64; 2],
    pub phi_h: [f64; 2],
    pub phi_k: [f64; 2],
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            gamma_h: [-0.5, 0.5],
            phi_h: [-0.8, 0.6],
            phi_k: [0.25, 1.6],
        }
    }
}

impl JointLimits {
    pub fn check(&self, q: &LegJointAngles) -> Result<(), KinematicsError> {
        let joints = [
            ("gamma_h", q.gamma_h, self.gamma_h),
            ("phi_h", q.phi_h, self.phi_h),
            ("phi_k", q.phi_k, self.phi_k),
        ];
        for (joint, value, [min, max]) in joints {
            if !(min..=max).contains(&value) {
                return Err(KinematicsError::JointLimit {
                    joint,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

/// Body position and orientation in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    pub position: Vector3<f64>,
    rotation: Rotation3<f64>,
}

impl BodyPose {
    /// Validates that `rotation` is orthonormal with determinant +1 (to 1e-10).
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self, KinematicsError> {
        let orthogonality = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(orthogonality <= 1e-10 && (det - 1.0).abs() <= 1e-10) {
            return Err(KinematicsError::InvalidRotation { orthogonality, det });
        }
        Ok(Self {
            position,
            rotation: Rotation3::from_matrix_unchecked(rotation),
        })
    }

    pub fn from_rotation(position: Vector3<f64>, rotation: Rotation3<f64>) -> Self {
        Self { position, rotation }
    }

    pub fn upright(position: Vector3<f64>) -> Self {
        Self::from_rotation(position, Rotation3::identity())
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }
}

/// Inertial positions produced by [`fk_chain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegPositions {
    pub pelvis: Vector3<f64>,
    pub hip: Vector3<f64>,
    pub knee: Vector3<f64>,
    pub foot: Vector3<f64>,
    pub thruster: Vector3<f64>,
}

fn rot_x(angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), angle)
}

fn rot_y(angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), angle)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

pub fn fk_chain(
    pose: &BodyPose,
    joints: &LegJointAngles,
    links: &LinkLengths,
    side: Side,
) -> LegPositions {
    let r_b = pose.rotation;
    let r_p = r_b * rot_x(joints.gamma_h);
    let r_h = r_p * rot_y(joints.phi_h);
    let r_k = r_h * rot_y(joints.phi_k);

    let pelvis = pose.position + r_b * links.l1(side);
    let hip = pelvis + r_p * links.l2(side);
    let knee = hip + r_h * links.l3(side);
    let foot = knee + r_k * links.l4(joints.phi_k);
    let thruster = pose.position + r_b * links.lt(side);
    LegPositions {
        pelvis,
        hip,
        knee,
        foot,
        thruster,
    }
}

/// Closed-form inverse kinematics for a foot target in the inertial frame.
///
/// The frontal hip angle is fixed first: the pelvis-to-foot vector keeps its
/// x component and its yz-norm under `R_x(gamma)`, and the lateral offset of
/// the leg (`l2.y + l3.y`) is invariant under the sagittal joints. The
/// remaining sagittal problem is a two-link chain whose second link sweeps a
/// circle as the knee turns. Of the two knee solutions the one putting the
/// knee furthest forward of the hip-foot line is returned. The foot is
/// assumed to hang below the hip.
pub fn leg_ik(
    foot_target: &Vector3<f64>,
    pose: &BodyPose,
    links: &LinkLengths,
    side: Side,
) -> Result<LegJointAngles, KinematicsError> {
    let l2 = links.l2(side);
    let l3 = links.l3(side);
    let t = pose.rotation.inverse() * (foot_target - pose.position) - links.l1(side);

    let lateral = l2.y + l3.y;
    let ((cx, cz), radius) = links.shank_circle();
    let rho = cx.hypot(cz);
    let (r_min, r_max) = ((rho - radius).abs(), rho + radius);

    let out_of_workspace = || KinematicsError::OutOfWorkspace {
        side,
        target: (*foot_target).into(),
        nearest: nearest_reachable(&t, links, side, pose).into(),
    };

    let yz_sq = t.y * t.y + t.z * t.z;
    let az_sq = yz_sq - lateral * lateral;
    if az_sq < 0.0 {
        return Err(out_of_workspace());
    }
    let az = -az_sq.sqrt();
    let gamma_h = wrap_angle(t.z.atan2(t.y) - az.atan2(lateral));

    let (bx, bz) = (t.x - l2.x, az - l2.z);
    let r = bx.hypot(bz);
    // Tiny slack for targets produced by forward kinematics at full stretch.
    let slack = 1e-12 * (1.0 + r_max);
    if r > r_max + slack || r < r_min - slack {
        return Err(out_of_workspace());
    }

    let k = (cx * cx + cz * cz + radius * radius - r * r) / (2.0 * radius);
    let alpha = cx.atan2(cz);
    let delta = (k / rho).clamp(-1.0, 1.0).acos();
    let shank = |phi_k: f64| (cx - radius * phi_k.sin(), cz - radius * phi_k.cos());
    // 2-D cross product (x, z) of the hip-to-foot direction with the thigh;
    // positive when the knee sits ahead of the hip-foot line.
    let knee_forwardness = |phi_k: f64| {
        let (wx, wz) = shank(phi_k);
        wx * l3.z - wz * l3.x
    };
    let candidates = [wrap_angle(alpha + delta), wrap_angle(alpha - delta)];
    let phi_k = if knee_forwardness(candidates[0]) >= knee_forwardness(candidates[1]) {
        candidates[0]
    } else {
        candidates[1]
    };
    let (wx, wz) = shank(phi_k);
    let phi_h = wrap_angle(bx.atan2(bz) - wx.atan2(wz));

    Ok(LegJointAngles {
        gamma_h,
        phi_h,
        phi_k,
    })
}

/// Projects a pelvis-frame target onto the reachable shell, keeping its
/// direction, and maps it back to the inertial frame.
fn nearest_reachable(
    t: &Vector3<f64>,
    links: &LinkLengths,
    side: Side,
    pose: &BodyPose,
) -> Vector3<f64> {
    let l2 = links.l2(side);
    let l3 = links.l3(side);
    let lateral = l2.y + l3.y;
    let ((cx, cz), radius) = links.shank_circle();
    let rho = cx.hypot(cz);
    let margin = 1e-9;
    let (r_min, r_max) = (
        (rho - radius).abs() * (1.0 + margin),
        (rho + radius) * (1.0 - margin),
    );

    let yz = t.y.hypot(t.z);
    let az = -(yz * yz - lateral * lateral).max(0.0).sqrt();
    let (mut bx, mut bz) = (t.x - l2.x, az - l2.z);
    let r = bx.hypot(bz);
    if r < 1e-12 {
        bz = -r_min;
    } else {
        let scale = r.clamp(r_min, r_max) / r;
        bx *= scale;
        bz *= scale;
    }
    let az_new = bz + l2.z;
    let yz_new = (lateral * lateral + az_new * az_new).sqrt();
    let (dir_y, dir_z) = if yz > 1e-12 {
        (t.y / yz, t.z / yz)
    } else {
        (0.0, -1.0)
    };
    let local = Vector3::new(bx + l2.x, dir_y * yz_new, dir_z * yz_new);
    pose.position + pose.rotation * (local + links.l1(side))
}
