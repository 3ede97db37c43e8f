//! Thruster-assisted capture-point walking control.
//!
//! * [`model`]: virtual-buoyancy pendulum, orbital energy and capture point
//! * [`kinematics`]: leg-chain forward and inverse kinematics
//! * [`mpc`]: capture-point state space, exact discretization, condensed QP
//! * [`qp`]: dense primal-dual interior-point QP solver
//! * [`sim`]: closed-loop trot-in-place simulation and thrust sweeps
//! * [`config`]: the TOML scenario file

pub mod config;
pub mod kinematics;
pub mod model;
pub mod mpc;
pub mod qp;
pub mod sim;

pub use model::{AxisState, PlanarState, Side, VlipParams};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/capture_point.md")]
    struct CapturePoint;
    #[doc = include_str!("../../../book/src/mpc.md")]
    struct Mpc;
    #[doc = include_str!("../../../book/src/qp.md")]
    struct Qp;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/kinematics.md")]
    struct Kinematics;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
