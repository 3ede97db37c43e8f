//! The scenario file.
//!
//! A TOML document with four tables. Every key is required so that a
//! config file always shows the full parameter set; `default_config_text`
//! produces a commented file holding the built-in defaults.
//!
//! ```
//! use thrustwalk::config::{default_config_text, ScenarioConfig};
//!
//! let cfg = ScenarioConfig::from_toml_str(&default_config_text()).unwrap();
//! assert_eq!(cfg, ScenarioConfig::default());
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

use crate::kinematics::{KinematicsError, LinkLengths};
use crate::model::{ModelError, VlipParams};
use crate::mpc::{MpcError, QpWeights};
use crate::sim::{ControllerConfig, GaitConfig, SimError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("TOML syntax: {0}")]
    Syntax(String),
    #[error("missing key `{key}` (expected {expected})")]
    Missing { key: String, expected: String },
    #[error("invalid key `{key}` (expected {expected}): {message}")]
    Invalid {
        key: String,
        expected: String,
        message: String,
    },
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("[model] {0}")]
    Model(#[from] ModelError),
    #[error("[gait] {0}")]
    Gait(#[from] SimError),
    #[error("[controller] {0}")]
    Controller(#[from] MpcError),
    #[error("[links] {0}")]
    Links(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScenarioConfig {
    pub params: VlipParams,
    pub gait: GaitConfig,
    pub controller: ControllerConfig,
    pub links: LinkLengths,
}

struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn open(root: &'a Table, name: &'static str) -> Result<Self, ConfigError> {
        match root.get(name) {
            Some(Value::Table(table)) => Ok(Self {
                name,
                table,
                seen: Vec::new(),
            }),
            Some(_) => Err(ConfigError::Invalid {
                key: name.into(),
                expected: "a table".into(),
                message: "not a table".into(),
            }),
            None => Err(ConfigError::Missing {
                key: format!("[{name}]"),
                expected: "a table".into(),
            }),
        }
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn get(&mut self, key: &'static str, expected: &str) -> Result<&'a Value, ConfigError> {
        self.seen.push(key);
        self.table.get(key).ok_or_else(|| ConfigError::Missing {
            key: self.key(key),
            expected: expected.into(),
        })
    }

    fn invalid(&self, key: &str, expected: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: self.key(key),
            expected: expected.into(),
            message: message.into(),
        }
    }

    fn number(&self, key: &str, expected: &str, v: &Value) -> Result<f64, ConfigError> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(self.invalid(key, expected, format!("not a number: {other}"))),
        }
    }

    /// `unit` is e.g. "kg"; used in the error message.
    fn f64(&mut self, key: &'static str, unit: &str) -> Result<f64, ConfigError> {
        let expected = format!("a number in {unit}");
        let v = self.get(key, &expected)?;
        self.number(key, &expected, v)
    }

    fn array<const N: usize>(
        &mut self,
        key: &'static str,
        unit: &str,
    ) -> Result<[f64; N], ConfigError> {
        let expected = format!("an array of {N} numbers in {unit}");
        let v = self.get(key, &expected)?;
        let items = v
            .as_array()
            .ok_or_else(|| self.invalid(key, &expected, "not an array"))?;
        if items.len() != N {
            return Err(self.invalid(key, &expected, format!("has {} entries", items.len())));
        }
        let mut out = [0.0; N];
        for (o, item) in out.iter_mut().zip(items) {
            *o = self.number(key, &expected, item)?;
        }
        Ok(out)
    }

    fn count(&mut self, key: &'static str) -> Result<usize, ConfigError> {
        let expected = "a positive integer";
        let v = self.get(key, expected)?;
        match v {
            Value::Integer(i) if *i > 0 => Ok(*i as usize),
            other => Err(self.invalid(key, expected, format!("got {other}"))),
        }
    }

    fn bool(&mut self, key: &'static str) -> Result<bool, ConfigError> {
        let v = self.get(key, "true or false")?;
        v.as_bool()
            .ok_or_else(|| self.invalid(key, "true or false", format!("got {v}")))
    }

    fn finish(self) -> Result<(), ConfigError> {
        for key in self.table.keys() {
            if !self.seen.contains(&key.as_str()) {
                return Err(ConfigError::Unknown(self.key(key)));
            }
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        for key in root.keys() {
            if !["model", "gait", "controller", "links"].contains(&key.as_str()) {
                return Err(ConfigError::Unknown(key.clone()));
            }
        }

        let mut s = Section::open(&root, "model")?;
        let params = VlipParams::from_parts(
            s.f64("mass_kg", "kg")?,
            s.f64("z0_m", "m")?,
            s.f64("gravity_mps2", "m/s^2")?,
            s.f64("thrust_n", "N")?,
            s.f64("thrust_pitch_rad", "rad")?,
            s.f64("gain_x", "dimensionless units")?,
            s.f64("gain_y", "dimensionless units")?,
        )?;
        s.finish()?;

        let mut s = Section::open(&root, "gait")?;
        let gait = GaitConfig {
            step_period_s: s.f64("step_period_s", "s")?,
            control_dt_s: s.f64("control_dt_s", "s")?,
            sim_duration_s: s.f64("sim_duration_s", "s")?,
            v_ref_mps: s.array("v_ref_mps", "m/s")?,
            foot_lateral_offset_m: s.f64("foot_lateral_offset_m", "m")?,
            foot_bound_m: s.f64("foot_bound_m", "m")?,
            initial_com_offset_m: s.array("initial_com_offset_m", "m")?,
            initial_com_velocity_mps: s.array("initial_com_velocity_mps", "m/s")?,
        };
        s.finish()?;
        gait.validate()?;

        let mut s = Section::open(&root, "controller")?;
        let controller = ControllerConfig {
            use_qp: s.bool("use_qp")?,
            horizon: s.count("horizon")?,
            weights: QpWeights {
                q_state: s.array("q_state", "cost weights")?,
                r_input: s.array("r_input", "cost weights")?,
                u_bound_mps: s.f64("u_bound_mps", "m/s")?,
            },
            tol: s.f64("tol", "dimensionless units")?,
            max_iter: s.count("max_iter")?,
        };
        s.finish()?;
        controller.weights.validate()?;
        if !(controller.tol.is_finite() && controller.tol > 0.0) {
            return Err(ConfigError::Invalid {
                key: "controller.tol".into(),
                expected: "a positive number".into(),
                message: format!("got {}", controller.tol),
            });
        }

        let mut s = Section::open(&root, "links")?;
        let links = LinkLengths {
            l1_body_to_pelvis: s.array("l1_body_to_pelvis_m", "m")?,
            l2_pelvis_to_hip: s.array("l2_pelvis_to_hip_m", "m")?,
            l3_hip_to_knee: s.array("l3_hip_to_knee_m", "m")?,
            l4a: s.f64("l4a_m", "m")?,
            l4b: s.f64("l4b_m", "m")?,
            lt_body_to_thruster: s.array("lt_body_to_thruster_m", "m")?,
        };
        s.finish()?;
        links.validate()?;

        Ok(Self {
            params,
            gait,
            controller,
            links,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Commented TOML that parses back to exactly `self`.
    pub fn to_toml_string(&self) -> String {
        let p = &self.params;
        let g = &self.gait;
        let c = &self.controller;
        let l = &self.links;
        let arr = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            format!("[{}]", items.join(", "))
        };
        let mut out = String::new();
        let _ = write!(
            out,
            r#"# thrustwalk scenario. SI units throughout; every key is required.

[model]
# Robot mass and nominal CoM height.
mass_kg = {mass:?}
z0_m = {z0:?}
gravity_mps2 = {g:?}
# Combined thruster force. Its vertical part must stay below the weight.
thrust_n = {thrust:?}
# Thrust tilt about the pitch axis; 0 is straight up.
thrust_pitch_rad = {pitch:?}
# Capture-point velocity gains K_x, K_y.
gain_x = {kx:?}
gain_y = {ky:?}

[gait]
# Not reported for the hardware; chosen defaults.
step_period_s = {step:?}
control_dt_s = {dt:?}
sim_duration_s = {dur:?}
v_ref_mps = {vref}
# Half stance width, added to frontal placements with the sign of the new stance foot.
foot_lateral_offset_m = {lat:?}
# Per-axis clip on the capture-point step.
foot_bound_m = {bound:?}
# CoM relative to the first stance (left) foot, which starts at the origin.
initial_com_offset_m = {x0}
initial_com_velocity_mps = {v0}

[controller]
# false runs plain capture-point stepping (same as --no-qp).
use_qp = {use_qp}
horizon = {horizon}
# Diagonal state weights over [p_x, p_y, xi_x, xi_y].
q_state = {q}
# Diagonal input weights over [v_ref_x, v_ref_y].
r_input = {r}
# Box bound on each reference-velocity input.
u_bound_mps = {ub:?}
tol = {tol:?}
max_iter = {max_iter}

[links]
# Left-leg link vectors in the body/pelvis/hip frames; the right leg mirrors y.
# Illustrative proportions, not hardware measurements.
l1_body_to_pelvis_m = {l1}
l2_pelvis_to_hip_m = {l2}
l3_hip_to_knee_m = {l3}
# Parallel-linkage shank: offset arm and shank length.
l4a_m = {l4a:?}
l4b_m = {l4b:?}
lt_body_to_thruster_m = {lt}
"#,
            mass = p.mass_kg(),
            z0 = p.z0_m(),
            g = p.gravity_mps2(),
            thrust = p.thrust_n(),
            pitch = p.thrust_pitch_rad(),
            kx = p.gain_x(),
            ky = p.gain_y(),
            step = g.step_period_s,
            dt = g.control_dt_s,
            dur = g.sim_duration_s,
            vref = arr(&g.v_ref_mps),
            lat = g.foot_lateral_offset_m,
            bound = g.foot_bound_m,
            x0 = arr(&g.initial_com_offset_m),
            v0 = arr(&g.initial_com_velocity_mps),
            use_qp = c.use_qp,
            horizon = c.horizon,
            q = arr(&c.weights.q_state),
            r = arr(&c.weights.r_input),
            ub = c.weights.u_bound_mps,
            tol = c.tol,
            max_iter = c.max_iter,
            l1 = arr(&l.l1_body_to_pelvis),
            l2 = arr(&l.l2_pelvis_to_hip),
            l3 = arr(&l.l3_hip_to_knee),
            l4a = l.l4a,
            l4b = l.l4b,
            lt = arr(&l.lt_body_to_thruster),
        );
        out
    }
}

/// The file written by `thrustwalk init-config`.
pub fn default_config_text() -> String {
    ScenarioConfig::default().to_toml_string()
}
