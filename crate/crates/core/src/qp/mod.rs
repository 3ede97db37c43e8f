//! Dense convex quadratic programs
//!
//! ```text
//! minimize    u' P u + c' u
//! subject to  A_in u <= b_in
//! ```
//!
//! Note the objective carries no factor 1/2: the stationarity condition is
//! `2 P u + c + A_in' lambda = 0`. Everything in this module uses that
//! convention, so a P taken from a `1/2 u'Hu` formulation must be halved
//! before it is handed over.

mod format;
mod ipm;

pub use format::{parse_problem, write_problem, ParseError};
pub use ipm::{solve, solve_with, IterationInfo, QpSettings};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("P is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("problem data contains non-finite values")]
    NotFinite,
    #[error("KKT system is not positive definite; P must be positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    p: DMatrix<f64>,
    c: DVector<f64>,
    a_in: DMatrix<f64>,
    b_in: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        p: DMatrix<f64>,
        c: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = c.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(QpError::Dimension(format!(
                "P is {}x{} but c has {} entries",
                p.nrows(),
                p.ncols(),
                n
            )));
        }
        if a_in.ncols() != n && a_in.nrows() > 0 {
            return Err(QpError::Dimension(format!(
                "A_in has {} columns, expected {}",
                a_in.ncols(),
                n
            )));
        }
        if a_in.nrows() != b_in.len() {
            return Err(QpError::Dimension(format!(
                "A_in has {} rows but b_in has {} entries",
                a_in.nrows(),
                b_in.len()
            )));
        }
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        if !(finite(p.as_slice())
            && finite(c.as_slice())
            && finite(a_in.as_slice())
            && finite(b_in.as_slice()))
        {
            return Err(QpError::NotFinite);
        }
        let asym = if n == 0 {
            0.0
        } else {
            (&p - p.transpose()).amax()
        };
        if asym > 1e-10 * p.amax().max(1.0) {
            return Err(QpError::NotSymmetric(asym));
        }
        // Keep an explicit (m x n) shape for m = 0.
        let a_in = if a_in.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            a_in
        };
        Ok(Self { p, c, a_in, b_in })
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(p: DMatrix<f64>, c: DVector<f64>) -> Result<Self, QpError> {
        let n = c.len();
        Self::new(p, c, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }
    pub fn num_constraints(&self) -> usize {
        self.b_in.len()
    }
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }
    pub fn a_in(&self) -> &DMatrix<f64> {
        &self.a_in
    }
    pub fn b_in(&self) -> &DVector<f64> {
        &self.b_in
    }

    /// `u' P u + c' u`
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.p * u)) + self.c.dot(u)
    }

    /// `2 P u + c`
    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        2.0 * (&self.p * u) + &self.c
    }

    /// Same problem with P and c multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            p: &self.p * alpha,
            c: &self.c * alpha,
            a_in: self.a_in.clone(),
            b_in: self.b_in.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "Optimal",
            QpStatus::MaxIterations => "MaxIterations",
            QpStatus::Infeasible => "Infeasible",
        }
    }
}

/// First-order optimality measures of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `|| 2 P u + c + A' lambda ||_inf`
    pub stationarity: f64,
    /// `max(0, max_i (A u - b)_i)`
    pub primal_feasibility: f64,
    /// `| lambda' (b - A u) |`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.complementarity)
    }
}

pub fn kkt_residuals(prob: &QpProblem, u: &DVector<f64>, lambda: &DVector<f64>) -> KktResiduals {
    let mut grad = prob.gradient(u);
    let stationarity;
    let (primal_feasibility, complementarity);
    if prob.num_constraints() == 0 {
        stationarity = grad.amax();
        primal_feasibility = 0.0;
        complementarity = 0.0;
    } else {
        grad += prob.a_in.transpose() * lambda;
        stationarity = grad.amax();
        let slack = &prob.b_in - &prob.a_in * u;
        primal_feasibility = slack.iter().fold(0.0f64, |acc, s| acc.max(-s));
        complementarity = lambda.dot(&slack).abs();
    }
    KktResiduals {
        stationarity,
        primal_feasibility,
        complementarity,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: DVector<f64>,
    /// Multipliers of the inequality constraints.
    pub lambda: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt: KktResiduals,
    /// Per-iteration diagnostics of the interior-point loop.
    pub history: Vec<IterationInfo>,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}
