//! Runs the closed loop over a list of thrust levels.

use rayon::prelude::*;
use serde::Serialize;

use super::{run_closed_loop, ControllerConfig, GaitConfig, SimError, SimTrace};
use crate::model::VlipParams;

/// Band on |CoM x| used for the settling time.
pub const SETTLING_BAND_M: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub thrust_n: f64,
    /// Present when the thrust level itself is invalid (e.g. exceeds the weight).
    pub effective_gravity_mps2: Option<f64>,
    pub omega_rad_s: Option<f64>,
    /// `sqrt(z0 / g_eff)`, the velocity-to-capture-point gain.
    pub gain_factor_s: Option<f64>,
    pub max_abs_xi_x_m: Option<f64>,
    pub max_abs_xi_y_m: Option<f64>,
    pub max_abs_com_x_m: Option<f64>,
    /// First time after which |CoM x| stays within [`SETTLING_BAND_M`].
    pub settling_time_s: Option<f64>,
    pub final_com_x_m: Option<f64>,
    pub final_com_y_m: Option<f64>,
    pub status: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    /// Ordered by ascending thrust.
    pub rows: Vec<SweepRow>,
    /// The capture-point gain factor strictly increases with thrust over the valid rows.
    pub gain_factor_increasing: bool,
    /// The natural frequency strictly decreases with thrust over the valid rows.
    pub omega_decreasing: bool,
}

fn settling_time(trace: &SimTrace) -> Option<f64> {
    let last_outside = trace
        .records
        .iter()
        .rposition(|r| r.com_x_m.abs() > SETTLING_BAND_M);
    match last_outside {
        None => trace.records.first().map(|r| r.t_s),
        Some(i) => trace.records.get(i + 1).map(|r| r.t_s),
    }
}

fn summarize(
    thrust_n: f64,
    params: Result<VlipParams, SimError>,
    run: Option<&Result<SimTrace, SimError>>,
) -> SweepRow {
    let mut row = SweepRow {
        thrust_n,
        effective_gravity_mps2: None,
        omega_rad_s: None,
        gain_factor_s: None,
        max_abs_xi_x_m: None,
        max_abs_xi_y_m: None,
        max_abs_com_x_m: None,
        settling_time_s: None,
        final_com_x_m: None,
        final_com_y_m: None,
        status: String::new(),
        error: None,
    };
    let params = match params {
        Ok(p) => p,
        Err(e) => {
            row.status = "invalid".into();
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.effective_gravity_mps2 = Some(params.effective_gravity());
    row.omega_rad_s = Some(params.natural_frequency());
    row.gain_factor_s = Some(params.capture_gain_factor());
    match run {
        Some(Ok(trace)) => {
            let amax = |f: fn(&super::SimRecord) -> f64| {
                trace.records.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
            };
            row.max_abs_xi_x_m = Some(amax(|r| r.xi_x_m));
            row.max_abs_xi_y_m = Some(amax(|r| r.xi_y_m));
            row.max_abs_com_x_m = Some(amax(|r| r.com_x_m));
            row.settling_time_s = settling_time(trace);
            let last = trace.records.last();
            row.final_com_x_m = last.map(|r| r.com_x_m);
            row.final_com_y_m = last.map(|r| r.com_y_m);
            row.status = "ok".into();
        }
        Some(Err(e)) => {
            row.status = if e.is_numerical() {
                "numerical_failure"
            } else {
                "error"
            }
            .into();
            row.error = Some(e.to_string());
        }
        None => row.status = "invalid".into(),
    }
    row
}

fn strictly_monotone(values: impl Iterator<Item = f64>, increasing: bool) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// The closed-loop run for one thrust level; `None` when the level was invalid.
pub type SweepRun = Option<Result<SimTrace, SimError>>;

/// Simulates every thrust level on `jobs` worker threads (0 picks the
/// default pool size). Results are deterministic and do not depend on
/// `jobs`. Traces come back in the same order as the summary rows, `None`
/// where the thrust level was rejected.
pub fn thrust_sweep(
    base: &VlipParams,
    thrusts_n: &[f64],
    gait: &GaitConfig,
    controller: &ControllerConfig,
    jobs: usize,
) -> Result<(SweepSummary, Vec<SweepRun>), rayon::ThreadPoolBuildError> {
    let mut thrusts = thrusts_n.to_vec();
    thrusts.sort_by(f64::total_cmp);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let runs: Vec<(Result<VlipParams, SimError>, SweepRun)> = pool.install(|| {
        thrusts
            .par_iter()
            .map(|&t| {
                let params = base.with_thrust(t).map_err(SimError::from);
                let run = params
                    .as_ref()
                    .ok()
                    .map(|p| run_closed_loop(p, gait, controller));
                (params, run)
            })
            .collect()
    });

    let rows: Vec<SweepRow> = thrusts
        .iter()
        .zip(&runs)
        .map(|(&t, (params, run))| summarize(t, params.clone(), run.as_ref()))
        .collect();
    // Distinct valid thrusts only; repeated entries carry no ordering information.
    let mut valid: Vec<&SweepRow> = rows.iter().filter(|r| r.omega_rad_s.is_some()).collect();
    valid.dedup_by(|a, b| a.thrust_n == b.thrust_n);
    let summary = SweepSummary {
        gain_factor_increasing: strictly_monotone(
            valid.iter().filter_map(|r| r.gain_factor_s),
            true,
        ),
        omega_decreasing: strictly_monotone(valid.iter().filter_map(|r| r.omega_rad_s), false),
        rows,
    };
    Ok((summary, runs.into_iter().map(|(_, run)| run).collect()))
}
