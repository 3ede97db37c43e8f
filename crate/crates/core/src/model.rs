//! Reduced-order walking model: a linear inverted pendulum whose gravity is
//! partially cancelled by body-mounted thrusters ("virtual buoyancy").
//!
//! With the CoM pinned at height `z0` each horizontal axis obeys
//!
//! ```text
//! p'' = (g_eff / z0) * p + |u_t| sin(theta_T) / m,    g_eff = g - |u_t| cos(theta_T) / m
//! ```
//!
//! where `p` is the CoM offset from the stance foot. The thrusters lower the
//! effective gravity and with it the natural frequency of the pendulum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default gravitational acceleration [m/s^2].
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be positive and finite (got {value})")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite (got {value})")]
    NotFinite { name: &'static str, value: f64 },
    #[error("{name} must be non-negative (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error(
        "virtual buoyancy violation: vertical thrust {vertical_thrust_n} N must stay below \
         body weight m*g = {weight_n} N (effective gravity would be {effective_gravity} m/s^2)"
    )]
    BuoyancyExceedsWeight {
        vertical_thrust_n: f64,
        weight_n: f64,
        effective_gravity: f64,
    },
    #[error("timestep must be finite and non-negative (got {0} s)")]
    InvalidTimestep(f64),
    #[error("pendulum state diverged to a non-finite value after a {dt_s} s step")]
    Diverged { dt_s: f64 },
}

/// Which foot is on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for the left side, -1 for the right side (y points left).
    pub fn lateral_sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }
}

/// Physical constants of the thrust-augmented pendulum.
///
/// Construction enforces positive mass, height and gravity, and rejects any
/// thrust whose vertical component would lift the full body weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlipParams {
    mass_kg: f64,
    z0_m: f64,
    gravity_mps2: f64,
    thrust_n: f64,
    thrust_pitch_rad: f64,
    gain_x: f64,
    gain_y: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::NotPositive { name, value })
    }
}

impl VlipParams {
    /// Pendulum with standard gravity, vertical thrust and unit capture-point gains.
    pub fn new(mass_kg: f64, z0_m: f64, thrust_n: f64) -> Result<Self, ModelError> {
        Self::from_parts(mass_kg, z0_m, STANDARD_GRAVITY, thrust_n, 0.0, 1.0, 1.0)
    }

    pub fn from_parts(
        mass_kg: f64,
        z0_m: f64,
        gravity_mps2: f64,
        thrust_n: f64,
        thrust_pitch_rad: f64,
        gain_x: f64,
        gain_y: f64,
    ) -> Result<Self, ModelError> {
        positive("mass_kg", mass_kg)?;
        positive("z0_m", z0_m)?;
        positive("gravity_mps2", gravity_mps2)?;
        positive("gain_x", gain_x)?;
        positive("gain_y", gain_y)?;
        if !thrust_n.is_finite() {
            return Err(ModelError::NotFinite {
                name: "thrust_n",
                value: thrust_n,
            });
        }
        if thrust_n < 0.0 {
            return Err(ModelError::Negative {
                name: "thrust_n",
                value: thrust_n,
            });
        }
        if !thrust_pitch_rad.is_finite() {
            return Err(ModelError::NotFinite {
                name: "thrust_pitch_rad",
                value: thrust_pitch_rad,
            });
        }
        let vertical = thrust_n * thrust_pitch_rad.cos();
        let weight = mass_kg * gravity_mps2;
        if vertical >= weight {
            return Err(ModelError::BuoyancyExceedsWeight {
                vertical_thrust_n: vertical,
                weight_n: weight,
                effective_gravity: gravity_mps2 - vertical / mass_kg,
            });
        }
        Ok(Self {
            mass_kg,
            z0_m,
            gravity_mps2,
            thrust_n,
            thrust_pitch_rad,
            gain_x,
            gain_y,
        })
    }

    /// Same robot with a different combined thrust magnitude.
    pub fn with_thrust(&self, thrust_n: f64) -> Result<Self, ModelError> {
        Self::from_parts(
            self.mass_kg,
            self.z0_m,
            self.gravity_mps2,
            thrust_n,
            self.thrust_pitch_rad,
            self.gain_x,
            self.gain_y,
        )
    }

    pub fn with_thrust_pitch(&self, thrust_pitch_rad: f64) -> Result<Self, ModelError> {
        Self::from_parts(
            self.mass_kg,
            self.z0_m,
            self.gravity_mps2,
            self.thrust_n,
            thrust_pitch_rad,
            self.gain_x,
            self.gain_y,
        )
    }

    pub fn with_gains(&self, gain_x: f64, gain_y: f64) -> Result<Self, ModelError> {
        Self::from_parts(
            self.mass_kg,
            self.z0_m,
            self.gravity_mps2,
            self.thrust_n,
            self.thrust_pitch_rad,
            gain_x,
            gain_y,
        )
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_kg
    }
    pub fn z0_m(&self) -> f64 {
        self.z0_m
    }
    pub fn gravity_mps2(&self) -> f64 {
        self.gravity_mps2
    }
    pub fn thrust_n(&self) -> f64 {
        self.thrust_n
    }
    pub fn thrust_pitch_rad(&self) -> f64 {
        self.thrust_pitch_rad
    }
    pub fn gain_x(&self) -> f64 {
        self.gain_x
    }
    pub fn gain_y(&self) -> f64 {
        self.gain_y
    }
    /// Body weight m*g [N]; the thrust magnitude at which the pendulum loses its restoring gravity.
    pub fn weight_n(&self) -> f64 {
        self.mass_kg * self.gravity_mps2
    }

    pub fn effective_gravity(&self) -> f64 {
        effective_gravity(self)
    }
    pub fn natural_frequency(&self) -> f64 {
        natural_frequency(self)
    }
    /// sqrt(z0 / g_eff): maps CoM velocity to capture-point offset.
    pub fn capture_gain_factor(&self) -> f64 {
        (self.z0_m / self.effective_gravity()).sqrt()
    }
}

impl Default for VlipParams {
    /// 4.5 kg robot with its CoM 0.5 m above the ground and the thrusters off.
    fn default() -> Self {
        Self::new(4.5, 0.5, 0.0).expect("default parameters are valid")
    }
}

/// CoM offset from the stance foot and its rate, along one horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisState {
    /// [m]
    pub p_m: f64,
    /// [m/s]
    pub v_mps: f64,
}

impl AxisState {
    pub const fn new(p_m: f64, v_mps: f64) -> Self {
        Self { p_m, v_mps }
    }

    pub fn is_finite(&self) -> bool {
        self.p_m.is_finite() && self.v_mps.is_finite()
    }
}

/// Sagittal (x) and frontal (y) pendulum states plus the stance bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: AxisState,
    pub y: AxisState,
    pub stance: Side,
}

impl PlanarState {
    pub fn axis(&self, i: usize) -> AxisState {
        match i {
            0 => self.x,
            1 => self.y,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn axis_mut(&mut self, i: usize) -> &mut AxisState {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            _ => panic!("axis index {i} out of range"),
        }
    }
}

/// g - |u_t| cos(theta_T) / m. Always strictly positive for a constructed [`VlipParams`].
pub fn effective_gravity(params: &VlipParams) -> f64 {
    params.gravity_mps2 - params.thrust_n * params.thrust_pitch_rad.cos() / params.mass_kg
}

/// omega = sqrt(g_eff / z0) [rad/s].
pub fn natural_frequency(params: &VlipParams) -> f64 {
    (effective_gravity(params) / params.z0_m).sqrt()
}

/// Horizontal CoM acceleration, including the constant push of a pitched thrust vector.
pub fn vlip_accel(state: AxisState, params: &VlipParams) -> f64 {
    state.p_m / params.z0_m * effective_gravity(params)
        + params.thrust_n * params.thrust_pitch_rad.sin() / params.mass_kg
}

/// Orbital energy per unit mass, E = v^2/2 - g_eff p^2 / (2 z0).
///
/// Positive energy carries the CoM over the foot, negative energy turns it
/// back, and zero energy brings it to rest on top of the foot.
pub fn orbital_energy(state: AxisState, params: &VlipParams) -> f64 {
    0.5 * state.v_mps * state.v_mps
        - 0.5 * effective_gravity(params) * state.p_m * state.p_m / params.z0_m
}

/// Foot offset (ahead of the CoM) that brings the pendulum to rest over the
/// new foot: v * sqrt(z0 / g_eff).
pub fn capture_point(state: AxisState, params: &VlipParams) -> f64 {
    state.v_mps * params.capture_gain_factor()
}

/// Capture point for tracking a reference velocity, gain * (v - v_ref) * sqrt(z0 / g_eff).
pub fn desired_capture_point(state: AxisState, v_ref: f64, gain: f64, params: &VlipParams) -> f64 {
    gain * (state.v_mps - v_ref) * params.capture_gain_factor()
}

/// Advances one axis by `dt_s` with the exact solution of the linear ODE.
///
/// The pitched-thrust term is a constant forcing, absorbed by shifting the
/// equilibrium to `-b / omega^2`; the shifted coordinate then follows the
/// cosh/sinh flow, so energy is preserved up to rounding when the pitch is 0.
pub fn integrate_axis(
    state: AxisState,
    params: &VlipParams,
    dt_s: f64,
) -> Result<AxisState, ModelError> {
    if !dt_s.is_finite() || dt_s < 0.0 {
        return Err(ModelError::InvalidTimestep(dt_s));
    }
    if dt_s == 0.0 {
        return Ok(state);
    }
    let omega = natural_frequency(params);
    let forcing = params.thrust_n * params.thrust_pitch_rad.sin() / params.mass_kg;
    let offset = forcing / (omega * omega);

    let q = state.p_m + offset;
    let (sh, ch) = ((omega * dt_s).sinh(), (omega * dt_s).cosh());
    let q_next = q * ch + state.v_mps / omega * sh;
    let v_next = q * omega * sh + state.v_mps * ch;
    let next = AxisState::new(q_next - offset, v_next);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(ModelError::Diverged { dt_s })
    }
}
