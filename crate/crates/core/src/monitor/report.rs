use serde::Serialize;

use super::potential::{analyze, check_update_monotonic, ConditionRecord, MonotonicityViolation, PotentialRecord};
use super::rate::{fit_rate, phi_at_integer_times, FitMode, RateFit};
use super::{tol, ControlParams};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::trace::{validate_trace, Trace, Violation};

/// Version of the JSON layout written by [`MonitorReport::to_json`].
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub events: usize,
    pub truncated_events: usize,
    /// Updates where the potential rose (truncated updates excluded).
    pub potential_increases: usize,
    /// Inter-event gaps where the potential rose.
    pub gap_increases: usize,
    pub curvature_failures: usize,
    pub forward_failures: usize,
    pub backward_failures: usize,
    /// Events where the potential fell below its guaranteed fraction of the gap.
    pub floor_failures: usize,
    /// Updates that raised the objective.
    pub bad_updates: usize,
    pub trace_violations: usize,
    pub initial_phi: f64,
    pub final_phi: f64,
    /// Largest `φ(p^t) / φ(p⁰)` seen at any event.
    pub max_phi_ratio: f64,
    pub initial_potential: f64,
    pub final_potential: f64,
    pub uses_gap: bool,
    pub rate: Option<RateFit>,
    pub rate_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub schema: u32,
    pub problem: String,
    pub schedule: String,
    pub staleness: String,
    pub seed: u64,
    pub horizon: f64,
    pub params: ControlParams,
    pub summary: MonitorSummary,
    pub potential_violations: Vec<MonotonicityViolation>,
    pub trace_violations: Vec<Violation>,
    pub potential: Vec<PotentialRecord>,
    pub conditions: Vec<ConditionRecord>,
}

impl MonitorReport {
    /// Violations that make a run fail verification.
    pub fn violation_count(&self) -> usize {
        self.summary.potential_increases + self.summary.gap_increases + self.summary.trace_violations
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(format!("report serialization: {e}")))
    }
}

/// Validates the trace, sweeps the potential and conditions, and optionally fits a rate.
pub fn monitor_trace(
    trace: &Trace,
    obj: &dyn Objective,
    params: &ControlParams,
    rate_mode: Option<FitMode>,
) -> Result<MonitorReport> {
    let trace_violations = validate_trace(trace);
    let analysis = analyze(trace, obj, params)?;
    let series = analysis.series;
    let potential_violations = check_update_monotonic(&series);

    let initial_phi = match obj.optimality_gap(&trace.initial) {
        Some(g) => g?,
        None => obj.value(&trace.initial)?,
    };
    let final_phi = series.records.last().map(|r| r.phi_after).unwrap_or(initial_phi);
    let max_phi_ratio = if initial_phi > 0.0 {
        series.records.iter().map(|r| r.phi_after / initial_phi).fold(1.0, f64::max)
    } else {
        1.0
    };
    let floor = params.gap_floor_factor();
    let floor_failures = match (floor, series.uses_gap) {
        (Some(f), true) => series
            .records
            .iter()
            .filter(|r| r.potential_after < f * r.phi_after - tol(r.phi_after))
            .count(),
        _ => 0,
    };
    let bad_updates =
        series.records.iter().filter(|r| r.phi_after > r.phi_before * (1.0 + 1e-12) + f64::MIN_POSITIVE).count();
    let gap_increases = series.records.iter().filter(|r| r.gap_delta > tol(r.potential_before)).count()
        + usize::from(series.tail_gap_delta > tol(series.final_value));

    let (rate, rate_error) = match rate_mode {
        None => (None, None),
        Some(mode) => match phi_at_integer_times(trace, obj).and_then(|v| fit_rate(&v, mode)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };

    let c = &analysis.conditions;
    let summary = MonitorSummary {
        events: trace.events.len(),
        truncated_events: series.records.iter().filter(|r| r.truncated).count(),
        potential_increases: potential_violations.len(),
        gap_increases,
        curvature_failures: c.iter().filter(|r| !r.curvature_ok).count(),
        forward_failures: c.iter().filter(|r| !r.truncated && !r.forward_ok).count(),
        backward_failures: c.iter().filter(|r| !r.backward_ok).count(),
        floor_failures,
        bad_updates,
        trace_violations: trace_violations.len(),
        initial_phi,
        final_phi,
        max_phi_ratio,
        initial_potential: series.initial,
        final_potential: series.final_value,
        uses_gap: series.uses_gap,
        rate,
        rate_error,
    };
    Ok(MonitorReport {
        schema: REPORT_SCHEMA,
        problem: trace.meta.problem.clone(),
        schedule: trace.meta.schedule.clone(),
        staleness: trace.meta.staleness.clone(),
        seed: trace.meta.seed,
        horizon: trace.horizon,
        params: *params,
        summary,
        potential_violations,
        trace_violations,
        potential: series.records,
        conditions: analysis.conditions,
    })
}
