//! The event loop: stale read, step, record.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{CoordBox, Objective, Point};
use crate::schedule::{generate_schedule, Schedule, SchedulePolicy};
use crate::staleness::{stale_view, StalenessPolicy};
use crate::trace::{Trace, TraceMeta, UpdateEvent};

/// `Δp = −g̃/γ · Δt`.
pub fn compute_update(g_tilde: f64, gamma: f64, delta_t: f64) -> Result<f64> {
    if !(delta_t > 0.0 && delta_t <= 1.0) {
        return Err(Error::Schedule(format!("delta_t = {delta_t} outside (0, 1]")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("step parameter gamma = {gamma} must be positive")));
    }
    Ok(-g_tilde / gamma * delta_t)
}

/// The quantity a step divides by, and the signed drive it moves against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub drive: f64,
    pub gamma: f64,
}

/// How each update turns a stale read into a step.
///
/// Hooks let stateful rules (cached gradients, warehouse stocks) observe the run.
pub trait UpdateRule {
    fn name(&self) -> String;

    /// Curvature factor the rule claims to honour in the local Lipschitz condition.
    fn alpha(&self) -> f64 {
        2.0
    }

    fn init(&mut self, _obj: &dyn Objective, _p0: &Point) -> Result<()> {
        Ok(())
    }

    /// Partial derivative read at the stale view.
    fn stale_gradient(&mut self, obj: &dyn Objective, j: usize, view: &Point, _current: &Point) -> Result<f64> {
        obj.grad_coord(view, j)
    }

    fn step(&mut self, j: usize, t: f64, current: &Point, g_tilde: f64) -> Result<Step>;

    /// Time passes from `from` to `to` with `p` held fixed.
    fn advance(&mut self, _obj: &dyn Objective, _p: &Point, _from: f64, _to: f64) -> Result<()> {
        Ok(())
    }

    fn after_update(&mut self, _obj: &dyn Objective, _p: &Point, _j: usize, _delta: f64) -> Result<()> {
        Ok(())
    }

    fn aux_columns(&self) -> Vec<String> {
        Vec::new()
    }

    /// Values for [`aux_columns`](UpdateRule::aux_columns) for the event just stepped.
    fn aux(&self, _obj: &dyn Objective, _p_before: &Point, _j: usize) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

/// Fixed `γ_j` per coordinate.
#[derive(Debug, Clone)]
pub struct ConstantSteps {
    pub gamma: Vec<f64>,
    pub alpha: f64,
}

impl ConstantSteps {
    pub fn new(gamma: Vec<f64>, alpha: f64) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidInput(format!("step parameter {g} must be positive and finite")));
        }
        if !(alpha >= 2.0) {
            return Err(Error::InvalidInput(format!("alpha = {alpha} must be at least 2")));
        }
        Ok(ConstantSteps { gamma, alpha })
    }
}

impl UpdateRule for ConstantSteps {
    fn name(&self) -> String {
        "constant".into()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn step(&mut self, j: usize, _t: f64, _current: &Point, g_tilde: f64) -> Result<Step> {
        Ok(Step { drive: g_tilde, gamma: self.gamma[j] })
    }
}

/// `γ_j^t` from a callback `(j, t, current, g̃) → γ`.
pub struct FnSteps<F> {
    pub f: F,
    pub alpha: f64,
}

impl<F> UpdateRule for FnSteps<F>
where
    F: FnMut(usize, f64, &Point, f64) -> f64,
{
    fn name(&self) -> String {
        "callback".into()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn step(&mut self, j: usize, t: f64, current: &Point, g_tilde: f64) -> Result<Step> {
        let gamma = (self.f)(j, t, current, g_tilde);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("callback returned gamma = {gamma}")));
        }
        Ok(Step { drive: g_tilde, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schedule: SchedulePolicy,
    pub schedule_seed: u64,
    pub staleness: StalenessPolicy,
    pub staleness_seed: u64,
    pub horizon: f64,
    /// Keep each event's view in the trace (memory grows with n × events).
    pub record_views: bool,
}

impl RunConfig {
    pub fn new(schedule: SchedulePolicy, staleness: StalenessPolicy, horizon: f64, seed: u64) -> Self {
        RunConfig {
            schedule,
            schedule_seed: seed,
            staleness,
            staleness_seed: seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
            horizon,
            record_views: false,
        }
    }
}

/// Generates the schedule from `cfg` and runs it.
pub fn run(obj: &dyn Objective, rule: &mut dyn UpdateRule, p0: &Point, cfg: &RunConfig) -> Result<Trace> {
    let schedule = generate_schedule(cfg.schedule, obj.dim(), cfg.horizon, cfg.schedule_seed)?;
    let mut trace = run_schedule(obj, rule, p0, &schedule, cfg.staleness, cfg.staleness_seed, cfg.record_views)?;
    trace.meta.seed = cfg.schedule_seed;
    Ok(trace)
}

/// Runs an explicit schedule.
pub fn run_schedule(
    obj: &dyn Objective,
    rule: &mut dyn UpdateRule,
    p0: &Point,
    schedule: &Schedule,
    staleness: StalenessPolicy,
    staleness_seed: u64,
    record_views: bool,
) -> Result<Trace> {
    let n = obj.dim();
    if p0.dim() != n {
        return Err(Error::Dimension { expected: n, got: p0.dim() });
    }
    if schedule.dim() != n {
        return Err(Error::Dimension { expected: n, got: schedule.dim() });
    }
    obj.check_domain(p0)?;
    rule.init(obj, p0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(staleness_seed);
    let mut p = p0.clone();
    let mut last = vec![0.0f64; n];
    // running[j] spans what every other coordinate has taken since j's last update
    let mut lo: Vec<Vec<f64>> = vec![p0.to_vec(); n];
    let mut hi: Vec<Vec<f64>> = vec![p0.to_vec(); n];
    let mut snapshot: Vec<Point> = vec![p0.clone(); n];
    let mut clock = 0.0;

    let mut trace = Trace::new(p0.clone(), schedule.horizon());
    trace.aux_names = rule.aux_columns();
    trace.meta = TraceMeta {
        problem: obj.name(),
        schedule: schedule.policy().map(|s| s.to_string()).unwrap_or_else(|| "explicit".into()),
        staleness: staleness.to_string(),
        seed: schedule.seed(),
    };

    for (seq, (t, j)) in schedule.events().into_iter().enumerate() {
        rule.advance(obj, &p, clock, t).map_err(|e| abort(seq, e))?;
        clock = t;
        let tau = last[j];
        let dt = t - tau;
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(Error::Schedule(format!("event {seq}: coordinate {j} gap {dt} outside (0, 1]")));
        }
        let bx = CoordBox::new(lo[j].clone(), hi[j].clone(), j, p[j])?;
        let view = stale_view(staleness, &bx, &p, &snapshot[j], obj, &mut rng)?;
        let g_tilde = rule.stale_gradient(obj, j, &view, &p).map_err(|e| abort(seq, e))?;
        let g_fresh = obj.grad_coord(&p, j).map_err(|e| abort(seq, e))?;
        let step = rule.step(j, t, &p, g_tilde).map_err(|e| abort(seq, e))?;
        let delta = compute_update(step.drive, step.gamma, dt)?;
        let aux = rule.aux(obj, &p, j).map_err(|e| abort(seq, e))?;

        let before = p[j];
        p[j] = before + delta;
        obj.check_domain(&p).map_err(|e| abort(seq, e))?;
        let phi_after = obj.value(&p).map_err(|e| abort(seq, e))?;
        rule.after_update(obj, &p, j, delta).map_err(|e| abort(seq, e))?;

        for m in 0..n {
            if m != j {
                lo[m][j] = lo[m][j].min(p[j]);
                hi[m][j] = hi[m][j].max(p[j]);
            }
        }
        lo[j].copy_from_slice(&p);
        hi[j].copy_from_slice(&p);
        snapshot[j] = p.clone();
        last[j] = t;

        trace.events.push(UpdateEvent {
            seq,
            time: t,
            coord: j,
            tau,
            view: record_views.then_some(view),
            g_tilde: step.drive,
            g_fresh,
            gamma: step.gamma,
            delta_p: delta,
            value_before: before,
            value_after: p[j],
            phi_after,
            aux,
        });
    }
    rule.advance(obj, &p, clock, schedule.horizon())
        .map_err(|e| abort(trace.events.len(), e))?;
    Ok(trace)
}

fn abort(event: usize, e: Error) -> Error {
    match e {
        Error::Domain(reason) => Error::Aborted { event, reason },
        Error::BalanceBreach { good, value, .. } => Error::BalanceBreach { event, good, value },
        Error::CapacityBreach { good, value, .. } => Error::CapacityBreach { event, good, value },
        other => other,
    }
}

/// Every coordinate once per unit time with fresh reads and fixed step parameters.
pub fn run_synchronous_baseline(obj: &dyn Objective, p0: &Point, gamma_sync: &[f64], rounds: usize) -> Result<Trace> {
    let mut rule = ConstantSteps::new(gamma_sync.to_vec(), 2.0)?;
    if gamma_sync.len() != obj.dim() {
        return Err(Error::Dimension { expected: obj.dim(), got: gamma_sync.len() });
    }
    if rounds == 0 {
        obj.check_domain(p0)?;
        return Ok(Trace::new(p0.clone(), 0.0));
    }
    let cfg = RunConfig::new(SchedulePolicy::SynchronousJitter, StalenessPolicy::Fresh, rounds as f64, 0);
    run(obj, &mut rule, p0, &cfg)
}
