use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `φ(t) ≈ C / t`.
    Sublinear,
    /// `φ(t) ≈ (1 − δ)^t φ(0)`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub mode: FitMode,
    /// Samples used after truncation at the floor.
    pub samples: usize,
    /// Least-squares decay (linear mode).
    pub delta: Option<f64>,
    /// Largest decay whose envelope contains every sample (linear mode).
    pub envelope_decay: Option<f64>,
    /// Least-squares constant (sublinear mode).
    pub constant: Option<f64>,
    /// Smallest constant whose envelope contains every sample (sublinear mode).
    pub envelope_constant: Option<f64>,
    /// Whether the least-squares fit itself bounds every sample.
    pub envelope_holds: bool,
    /// Root-mean-square residual of the fit, in the fitted coordinates.
    pub residual: f64,
}

/// Values at or below this are treated as converged and cut from the series.
pub const FIT_FLOOR: f64 = 1e-14;
const MIN_SAMPLES: usize = 3;

/// Fits a decay model to samples taken at times `0, 1, 2, …`.
pub fn fit_rate(phi: &[f64], mode: FitMode) -> Result<RateFit> {
    let cut = phi.iter().position(|&v| !(v > FIT_FLOOR)).unwrap_or(phi.len());
    let series = &phi[..cut];
    if series.len() < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_SAMPLES} positive samples above {FIT_FLOOR:e}, have {}",
            series.len()
        )));
    }
    match mode {
        FitMode::Linear => {
            let m = series.len() as f64;
            let ts: Vec<f64> = (0..series.len()).map(|t| t as f64).collect();
            let ys: Vec<f64> = series.iter().map(|v| v.ln()).collect();
            let tm = ts.iter().sum::<f64>() / m;
            let ym = ys.iter().sum::<f64>() / m;
            let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
            let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
            let slope = sxy / sxx;
            let icept = ym - slope * tm;
            let residual = (ts.iter().zip(&ys).map(|(t, y)| (y - icept - slope * t).powi(2)).sum::<f64>() / m).sqrt();
            let delta = 1.0 - slope.exp();
            let phi0 = series[0];
            let worst = series
                .iter()
                .enumerate()
                .skip(1)
                .map(|(t, v)| (v / phi0).powf(1.0 / t as f64))
                .fold(0.0, f64::max);
            let envelope_holds = series
                .iter()
                .enumerate()
                .all(|(t, &v)| v <= (1.0 - delta).powi(t as i32) * phi0 * (1.0 + 1e-9));
            Ok(RateFit {
                mode,
                samples: series.len(),
                delta: Some(delta),
                envelope_decay: Some(1.0 - worst),
                constant: None,
                envelope_constant: None,
                envelope_holds,
                residual,
            })
        }
        FitMode::Sublinear => {
            let pts: Vec<(f64, f64)> = series.iter().enumerate().skip(1).map(|(t, &v)| (t as f64, v)).collect();
            let num: f64 = pts.iter().map(|(t, v)| v / t).sum();
            let den: f64 = pts.iter().map(|(t, _)| 1.0 / (t * t)).sum();
            let c = num / den;
            let env = pts.iter().map(|(t, v)| t * v).fold(0.0, f64::max);
            let residual = (pts.iter().map(|(t, v)| (v - c / t).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
            let envelope_holds = pts.iter().all(|(t, v)| *v <= c / t * (1.0 + 1e-9));
            Ok(RateFit {
                mode,
                samples: series.len(),
                delta: None,
                envelope_decay: None,
                constant: Some(c),
                envelope_constant: Some(env),
                envelope_holds,
                residual,
            })
        }
    }
}

/// Objective gap (or value, when the minimum is unknown) at `t = 0, 1, …, ⌊horizon⌋`.
pub fn phi_at_integer_times(trace: &Trace, obj: &dyn Objective) -> Result<Vec<f64>> {
    let eval = |p: &crate::objective::Point| match obj.optimality_gap(p) {
        Some(g) => g,
        None => obj.value(p),
    };
    let mut p = trace.initial.clone();
    let mut out = vec![eval(&p)?];
    let mut events = trace.events.iter().peekable();
    let last = trace.horizon.floor() as usize;
    for t in 1..=last {
        let tf = t as f64;
        // state at time t includes every event at or before t
        while let Some(e) = events.next_if(|e| e.time <= tf) {
            p[e.coord] = e.value_after;
        }
        out.push(eval(&p)?);
    }
    Ok(out)
}
