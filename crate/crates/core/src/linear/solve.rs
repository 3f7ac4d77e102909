use serde::Serialize;

use super::composite::CompositeProblem;
use super::gram::CachedSteps;
use super::spd::SpdProblem;
use crate::engine::{run, ConstantSteps, RunConfig};
use crate::error::{Error, Result};
use crate::monitor::{monitor_trace, ControlParams, FitMode, MonitorReport};
use crate::objective::{Objective, Point};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub run: RunConfig,
    /// Step parameters; `None` uses the safe bound with `alpha`.
    pub gammas: Option<Vec<f64>>,
    pub alpha: f64,
    /// Target for `‖Ap − b‖∞` (SPD) or `‖∇F‖∞` (composite).
    pub tolerance: f64,
}

impl SolveOptions {
    pub fn new(run: RunConfig) -> Self {
        SolveOptions { run, gammas: None, alpha: 2.0, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub point: Point,
    #[serde(skip)]
    pub trace: Trace,
    pub report: MonitorReport,
    pub residual: f64,
    pub converged: bool,
    pub gammas: Vec<f64>,
}

fn pick_gammas(requested: &Option<Vec<f64>>, safe: Vec<f64>) -> Result<Vec<f64>> {
    match requested {
        None => Ok(safe),
        Some(g) if g.len() != safe.len() => Err(Error::Dimension { expected: safe.len(), got: g.len() }),
        Some(g) if g.iter().any(|x| !(*x > 0.0 && x.is_finite())) => {
            Err(Error::InvalidInput("step parameters must be positive".into()))
        }
        Some(g) => Ok(g.clone()),
    }
}

/// Overridden steps may be too aggressive to certify any constants; the monitor then
/// judges the run against the constants the safe steps would have earned.
fn monitor_params(own: Result<ControlParams>, safe: impl FnOnce() -> Result<ControlParams>) -> Result<ControlParams> {
    own.or_else(|_| safe())
}

pub fn solve_spd(problem: &SpdProblem, p0: &Point, opts: &SolveOptions) -> Result<Solution> {
    let safe = problem.safe_gammas(opts.alpha)?;
    let gammas = pick_gammas(&opts.gammas, safe.clone())?;
    let mut rule = ConstantSteps::new(gammas.clone(), opts.alpha)?;
    let trace = run(problem, &mut rule, p0, &opts.run)?;
    let params = monitor_params(problem.control_params(&gammas), || problem.control_params(&safe))?;
    let report = monitor_trace(&trace, problem, &params, Some(FitMode::Linear))?;
    let point = trace.final_point();
    let residual = problem.residual_inf(&point);
    Ok(Solution { converged: residual < opts.tolerance, point, trace, report, residual, gammas })
}

pub fn solve_composite(problem: &CompositeProblem, p0: &Point, opts: &SolveOptions) -> Result<Solution> {
    let safe = problem.safe_gammas(opts.alpha)?;
    let gammas = pick_gammas(&opts.gammas, safe.clone())?;
    let mut rule = CachedSteps::new(problem, gammas.clone(), opts.alpha)?;
    let trace = run(problem, &mut rule, p0, &opts.run)?;
    let params = monitor_params(problem.control_params(&gammas), || problem.control_params(&safe))?;
    let mode = problem.min_value().map(|_| FitMode::Linear);
    let report = monitor_trace(&trace, problem, &params, mode)?;
    let point = trace.final_point();
    let residual = problem.gradient(&point)?.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(Solution { converged: residual < opts.tolerance, point, trace, report, residual, gammas })
}

/// First time at which `‖Ap − b‖∞` drops below `threshold` along the trace.
pub fn time_to_residual(problem: &SpdProblem, trace: &Trace, threshold: f64) -> Option<f64> {
    let a = problem.matrix();
    let mut p = trace.initial.clone();
    let mut r: Vec<f64> = (0..p.dim()).map(|i| (0..p.dim()).map(|k| a[(i, k)] * p[k]).sum::<f64>() - problem.rhs()[i]).collect();
    let inf = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if inf(&r) < threshold {
        return Some(0.0);
    }
    for (n, e) in trace.events.iter().enumerate() {
        let d = e.value_after - p[e.coord];
        p[e.coord] = e.value_after;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri += a[(i, e.coord)] * d;
        }
        // incremental drift is re-zeroed periodically
        if n % 4096 == 4095 {
            r = problem.residual_vector(&p);
        }
        if inf(&r) < threshold {
            // confirm exactly before reporting
            if inf(&problem.residual_vector(&p)) < threshold {
                return Some(e.time);
            }
        }
    }
    None
}
