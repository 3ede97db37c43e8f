//! Per-tick trace records and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::Side;

/// Column order of the trace CSV.
pub const TRACE_COLUMNS: [&str; 15] = [
    "t_s",
    "com_x_m",
    "com_y_m",
    "com_vx_mps",
    "com_vy_mps",
    "xi_x_m",
    "xi_y_m",
    "u_x_mps",
    "u_y_mps",
    "stance",
    "foot_x_m",
    "foot_y_m",
    "thrust_n",
    "qp_status",
    "qp_iterations",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TickStatus {
    Optimal,
    /// The QP was switched off for the run.
    Disabled,
}

/// State of the loop at the start of one control tick, in world coordinates.
///
/// `xi_*` is the capture-point measurement fed to the QP and `u_*` the
/// reference-velocity correction it returned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub t_s: f64,
    pub com_x_m: f64,
    pub com_y_m: f64,
    pub com_vx_mps: f64,
    pub com_vy_mps: f64,
    pub xi_x_m: f64,
    pub xi_y_m: f64,
    pub u_x_mps: f64,
    pub u_y_mps: f64,
    pub stance: Side,
    pub foot_x_m: f64,
    pub foot_y_m: f64,
    pub thrust_n: f64,
    pub qp_status: TickStatus,
    pub qp_iterations: usize,
}

impl Default for SimRecord {
    fn default() -> Self {
        Self {
            t_s: 0.0,
            com_x_m: 0.0,
            com_y_m: 0.0,
            com_vx_mps: 0.0,
            com_vy_mps: 0.0,
            xi_x_m: 0.0,
            xi_y_m: 0.0,
            u_x_mps: 0.0,
            u_y_mps: 0.0,
            stance: Side::Left,
            foot_x_m: 0.0,
            foot_y_m: 0.0,
            thrust_n: 0.0,
            qp_status: TickStatus::Disabled,
            qp_iterations: 0,
        }
    }
}

impl SimRecord {
    /// CoM position relative to the stance foot.
    pub fn relative_com(&self) -> [f64; 2] {
        [self.com_x_m - self.foot_x_m, self.com_y_m - self.foot_y_m]
    }
}

pub fn write_trace_csv<W: Write>(writer: W, records: &[SimRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record(TRACE_COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> csv::Result<Vec<SimRecord>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}
