//! Offline checks over finished traces.
//!
//! The potential tracked here is the objective gap, minus a running integral of squared
//! fresh gradients, plus weighted cross-curvature credit for every update another coordinate
//! made since a coordinate's last step. It references future update times, so it is only
//! ever evaluated on complete traces.

mod lemma;
mod potential;
mod rate;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Point;

pub use lemma::{check_gradient_error_bound, GradientErrorCheck};
pub use potential::{
    analyze, check_conditions, check_update_monotonic, potential_series, Analysis, ConditionRecord,
    MonotonicityViolation, PotentialRecord, PotentialSeries,
};
pub use rate::{fit_rate, phi_at_integer_times, FitMode, RateFit, FIT_FLOOR};
pub use report::{monitor_trace, MonitorReport, MonitorSummary, REPORT_SCHEMA};

/// Relative-plus-absolute tolerance used by every inequality check.
pub const CHECK_TOL: f64 = 1e-9;

pub(crate) fn tol(magnitude: f64) -> f64 {
    CHECK_TOL * magnitude.abs().max(1.0)
}

/// How cross-coordinate weights are assigned at each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPolicy {
    /// Every weight is 1.
    Unit,
    /// Weight of `k` at an update of `u` is `p_k / p_u`.
    PriceRatio,
}

impl XiPolicy {
    /// Weight of coordinate `k` when coordinate `u` updates at state `p`.
    pub fn weight(&self, p: &Point, k: usize, u: usize) -> f64 {
        match self {
            XiPolicy::Unit => 1.0,
            XiPolicy::PriceRatio => p[k] / p[u],
        }
    }
}

/// Constants governing the potential and the condition checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub alpha: f64,
    pub eps_f: f64,
    pub eps_b: f64,
    pub c1: f64,
    pub c2: f64,
    pub xi: XiPolicy,
}

impl ControlParams {
    /// Validated parameters with the default constants.
    pub fn new(alpha: f64, eps_f: f64, eps_b: f64, xi: XiPolicy) -> Result<Self> {
        let (c1, c2) = default_constants(alpha, eps_f, eps_b)?;
        Ok(ControlParams { alpha, eps_f, eps_b, c1, c2, xi })
    }

    /// Arbitrary positive constants, for experiments outside the validated regime.
    pub fn with_constants(alpha: f64, eps_f: f64, eps_b: f64, c1: f64, c2: f64, xi: XiPolicy) -> Result<Self> {
        if !(alpha > 0.0 && eps_f >= 0.0 && eps_b >= 0.0 && c1 > 0.0 && c2 > 0.0) {
            return Err(Error::InvalidInput("control constants must be positive".into()));
        }
        Ok(ControlParams { alpha, eps_f, eps_b, c1, c2, xi })
    }

    /// Slack left in `1 − 1/α − 2ε_B − 2ε_F`.
    pub fn slack(&self) -> f64 {
        1.0 - 1.0 / self.alpha - 2.0 * self.eps_b - 2.0 * self.eps_f
    }

    /// Lower-bound factor relating the potential to the objective gap, when it applies.
    pub fn gap_floor_factor(&self) -> Option<f64> {
        let applies = 2.0 - self.c2 >= self.c1 * (2.0 + 8.0 * self.eps_b);
        applies.then(|| 1.0 - 2.0 * self.c1 * (1.0 + 4.0 * self.eps_b))
    }
}

/// `c1 = min{1 − 1/α − 2ε_B − 2ε_F, 1/4} / (1 + 4ε_B)` and `c2 = 1 − c1(2 + 8ε_B)`.
pub fn default_constants(alpha: f64, eps_f: f64, eps_b: f64) -> Result<(f64, f64)> {
    if !(alpha >= 2.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be at least 2")));
    }
    if !(eps_f > 0.0 && eps_b > 0.0) {
        return Err(Error::InvalidInput("eps_f and eps_b must be positive".into()));
    }
    let slack = 1.0 - 1.0 / alpha - 2.0 * eps_b - 2.0 * eps_f;
    if !(slack > 0.0) {
        return Err(Error::InvalidInput(format!(
            "1/alpha + 2 eps_b + 2 eps_f = {} is not below 1",
            1.0 - slack
        )));
    }
    let c1 = slack.min(0.25) / (1.0 + 4.0 * eps_b);
    let c2 = 1.0 - c1 * (2.0 + 8.0 * eps_b);
    Ok((c1, c2))
}
