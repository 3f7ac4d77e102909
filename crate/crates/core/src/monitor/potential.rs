use serde::Serialize;

use super::{tol, ControlParams};
use crate::error::{Error, Result};
use crate::objective::{CoordBox, Objective, Point};
use crate::trace::{Paths, Trace};

/// Potential and objective values around one update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialRecord {
    pub seq: usize,
    pub time: f64,
    pub coord: usize,
    pub phi_before: f64,
    pub phi_after: f64,
    /// `c1 Σ_j ∫ g_j²/γ̄_j` over each coordinate's open window, just before the update.
    pub integral_before: f64,
    pub integral_after: f64,
    /// Weighted cross-curvature credit, just before and after.
    pub credit_before: f64,
    pub credit_after: f64,
    pub potential_before: f64,
    pub potential_after: f64,
    /// Change of the potential over the gap preceding this event.
    pub gap_delta: f64,
    /// Some other coordinate never updates again, so a credit box was cut at the horizon.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSeries {
    pub initial: f64,
    pub records: Vec<PotentialRecord>,
    /// Value at the horizon.
    pub final_value: f64,
    /// Change over the gap from the last event to the horizon.
    pub tail_gap_delta: f64,
    pub gamma_bar: Vec<f64>,
    /// True when the objective gap (rather than the raw value) was used.
    pub uses_gap: bool,
}

/// Condition checks at one update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRecord {
    pub seq: usize,
    pub curvature_ok: bool,
    /// Largest `remainder − γ/α·Δ²` along the update segment (≤ 0 when the condition holds).
    pub curvature_excess: f64,
    pub forward_lhs: f64,
    pub forward_rhs: f64,
    pub forward_ok: bool,
    pub backward_lhs: f64,
    pub backward_rhs: f64,
    pub backward_ok: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub series: PotentialSeries,
    pub conditions: Vec<ConditionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub seq: usize,
    pub before: f64,
    pub after: f64,
}

fn gap_value(obj: &dyn Objective, p: &Point) -> Result<f64> {
    match obj.optimality_gap(p) {
        Some(g) => g,
        None => obj.value(p),
    }
}

/// Per-coordinate maximum observed step parameter.
fn gamma_bar(trace: &Trace) -> Vec<f64> {
    let n = trace.dim();
    let mut gb = vec![0.0f64; n];
    for e in &trace.events {
        gb[e.coord] = gb[e.coord].max(e.gamma);
    }
    let overall = gb.iter().cloned().fold(0.0, f64::max);
    let fill = if overall > 0.0 { overall } else { 1.0 };
    gb.iter().map(|&g| if g > 0.0 { g } else { fill }).collect()
}

/// Box for curvature lookups; objectives with constant curvature skip the window scan.
fn hbox(obj: &dyn Objective, paths: &Paths, p: &Point, pinned: usize, t1: f64, t2: f64) -> Result<CoordBox> {
    if obj.constant_hessian() {
        Ok(CoordBox::degenerate(p, pinned))
    } else {
        paths.window_box(pinned, t1, t2, p[pinned])
    }
}

/// Computes the potential series and the per-update condition checks in one sweep.
pub fn analyze(trace: &Trace, obj: &dyn Objective, params: &ControlParams) -> Result<Analysis> {
    let n = trace.dim();
    if obj.dim() != n {
        return Err(Error::Dimension { expected: obj.dim(), got: n });
    }
    if let Some(last) = trace.events.last() {
        if last.time > trace.horizon {
            return Err(Error::Trace(format!(
                "unfinished trace: event at {} beyond horizon {}",
                last.time, trace.horizon
            )));
        }
    }
    let (c1, c2) = (params.c1, params.c2);
    let uses_gap = obj.min_value().is_some();
    let gb = gamma_bar(trace);
    let paths = Paths::new(trace);

    let mut p = trace.initial.clone();
    let mut g = obj.gradient(&p)?;
    let mut phi = gap_value(obj, &p)?;
    let mut integral = vec![0.0f64; n];
    // credit weights per coordinate: Σw and Σw·(β − τ)
    let mut w_sum = vec![0.0f64; n];
    let mut w_rel = vec![0.0f64; n];
    let mut tau = vec![0.0f64; n];
    // inv_xi[j][k]: largest 1/ξ_j over updates of k since j's last update (0 when none)
    let mut inv_xi = vec![vec![0.0f64; n]; n];

    let compose = |phi: f64, integral: &[f64], w_sum: &[f64], w_rel: &[f64], tau: &[f64], t: f64| {
        let int: f64 = (0..n).map(|m| integral[m] / gb[m]).sum::<f64>() * c1;
        let credit: f64 =
            (0..n).map(|m| 2.0 * w_sum[m] - c2 * (w_sum[m] * (t - tau[m]) - w_rel[m])).sum();
        (int, credit, phi - int + credit)
    };

    let initial = compose(phi, &integral, &w_sum, &w_rel, &tau, 0.0).2;
    let mut records = Vec::with_capacity(trace.events.len());
    let mut conditions = Vec::with_capacity(trace.events.len());
    let mut clock = 0.0;
    let mut potential_prev = initial;

    for e in &trace.events {
        let (t, j) = (e.time, e.coord);
        let span = t - clock;
        for m in 0..n {
            integral[m] += g[m] * g[m] * span;
        }
        let (int_b, credit_b, pot_b) = compose(phi, &integral, &w_sum, &w_rel, &tau, t);
        let gap_delta = pot_b - potential_prev;

        let p_before = p.clone();
        let phi_before = phi;
        let dt = e.delta_t();
        let dp = e.value_after - e.value_before;

        // backward cross-curvature sum over the window since j's last update, before the bookkeeping resets it
        let mut backward_lhs = 0.0;
        if inv_xi[j].iter().any(|&x| x > 0.0) {
            let bx = hbox(obj, &paths, &p_before, j, tau[j], t)?;
            for k in 0..n {
                if k != j && inv_xi[j][k] > 0.0 {
                    backward_lhs += inv_xi[j][k] * obj.hessian_bound(k, j, &bx)?;
                }
            }
        }

        // curvature bound along the segment from the old to the new value
        let phi_raw = obj.value(&p_before)?;
        let mut curvature_excess = f64::NEG_INFINITY;
        for s in 0..=10 {
            let step = dp * s as f64 / 10.0;
            let q = p_before.with_coord(j, e.value_before + step);
            let rem = obj.value(&q)? - phi_raw - e.g_fresh * step;
            curvature_excess = curvature_excess.max(rem - e.gamma / params.alpha * step * step);
        }
        let curvature_ok = curvature_excess <= tol(phi_raw);

        // retire j's window
        integral[j] = 0.0;
        w_sum[j] = 0.0;
        w_rel[j] = 0.0;
        tau[j] = t;
        inv_xi[j].iter_mut().for_each(|x| *x = 0.0);

        p[j] = e.value_after;
        g = obj.gradient(&p)?;
        phi = gap_value(obj, &p)?;

        // open credit for every other coordinate; the same sums give the forward check
        let mut truncated = false;
        let mut forward_lhs = 0.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            let end = match paths.next_update(k, t) {
                Some(s) => s,
                None => {
                    truncated = true;
                    trace.horizon
                }
            };
            let bx = hbox(obj, &paths, &p, k, t, end)?;
            let xi = params.xi.weight(&p_before, k, j);
            let h = obj.hessian_bound(j, k, &bx)?;
            forward_lhs += xi * h;
            let w = xi * h * dp * dp / dt;
            w_sum[k] += w;
            w_rel[k] += w * (t - tau[k]);
            inv_xi[k][j] = inv_xi[k][j].max(1.0 / xi);
        }

        let (int_a, credit_a, pot_a) = compose(phi, &integral, &w_sum, &w_rel, &tau, t);
        let forward_rhs = params.eps_f * e.gamma;
        let backward_rhs = params.eps_b * e.gamma;
        conditions.push(ConditionRecord {
            seq: e.seq,
            curvature_ok,
            curvature_excess,
            forward_lhs,
            forward_rhs,
            forward_ok: forward_lhs <= forward_rhs + tol(forward_rhs),
            backward_lhs,
            backward_rhs,
            backward_ok: backward_lhs <= backward_rhs + tol(backward_rhs),
            truncated,
        });
        records.push(PotentialRecord {
            seq: e.seq,
            time: t,
            coord: j,
            phi_before,
            phi_after: phi,
            integral_before: int_b,
            integral_after: int_a,
            credit_before: credit_b,
            credit_after: credit_a,
            potential_before: pot_b,
            potential_after: pot_a,
            gap_delta,
            truncated,
        });
        potential_prev = pot_a;
        clock = t;
    }

    let span = (trace.horizon - clock).max(0.0);
    for m in 0..n {
        integral[m] += g[m] * g[m] * span;
    }
    let final_value = compose(phi, &integral, &w_sum, &w_rel, &tau, trace.horizon.max(clock)).2;
    Ok(Analysis {
        series: PotentialSeries {
            initial,
            records,
            final_value,
            tail_gap_delta: final_value - potential_prev,
            gamma_bar: gb,
            uses_gap,
        },
        conditions,
    })
}

pub fn potential_series(trace: &Trace, obj: &dyn Objective, params: &ControlParams) -> Result<PotentialSeries> {
    Ok(analyze(trace, obj, params)?.series)
}

pub fn check_conditions(trace: &Trace, obj: &dyn Objective, params: &ControlParams) -> Result<Vec<ConditionRecord>> {
    Ok(analyze(trace, obj, params)?.conditions)
}

/// Updates where the potential rose beyond tolerance. Truncated updates are skipped.
pub fn check_update_monotonic(series: &PotentialSeries) -> Vec<MonotonicityViolation> {
    series
        .records
        .iter()
        .filter(|r| !r.truncated && r.potential_after > r.potential_before + tol(r.potential_before))
        .map(|r| MonotonicityViolation { seq: r.seq, before: r.potential_before, after: r.potential_after })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, ConstantSteps, RunConfig};
    use crate::monitor::XiPolicy;
    use crate::objective::affine_extreme_points;
    use crate::schedule::SchedulePolicy;
    use crate::staleness::StalenessPolicy;
    use crate::trace::UpdateEvent;
    use approx::assert_relative_eq;

    /// ½pᵀAp with known minimum 0.
    struct Quad(Vec<Vec<f64>>);

    impl Objective for Quad {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn value(&self, p: &Point) -> Result<f64> {
            let n = self.dim();
            Ok((0..n).map(|i| (0..n).map(|k| 0.5 * p[i] * self.0[i][k] * p[k]).sum::<f64>()).sum())
        }
        fn grad_coord(&self, p: &Point, j: usize) -> Result<f64> {
            Ok((0..self.dim()).map(|k| self.0[j][k] * p[k]).sum())
        }
        fn hessian_bound(&self, j: usize, k: usize, _bx: &CoordBox) -> Result<f64> {
            Ok(self.0[j][k].abs())
        }
        fn constant_hessian(&self) -> bool {
            true
        }
        fn grad_extreme_points(&self, j: usize, bx: &CoordBox) -> Option<Result<(Point, Point)>> {
            Some(Ok(affine_extreme_points(|k| self.0[j][k], bx)))
        }
        fn min_value(&self) -> Option<f64> {
            Some(0.0)
        }
    }

    fn coupled() -> Quad {
        Quad(vec![vec![2.0, 1.0], vec![1.0, 2.0]])
    }

    fn spd_params() -> ControlParams {
        // gamma = 5.005 on [[2,1],[1,2]]
        let alpha = 2.0 * 5.005 / 2.0;
        let eps = 1.0 / 5.005;
        ControlParams::new(alpha, eps, eps, XiPolicy::Unit).unwrap()
    }

    /// The potential evaluated straight from its definition at a time `t` between events.
    fn potential_at(trace: &Trace, obj: &dyn Objective, params: &ControlParams, t: f64) -> f64 {
        let n = trace.dim();
        let paths = Paths::new(trace);
        let gb = gamma_bar(trace);
        let p_t = trace.point_at(t);
        let mut value = gap_value(obj, &p_t).unwrap();
        for j in 0..n {
            let tau_j = trace.events.iter().filter(|e| e.coord == j && e.time < t).map(|e| e.time).fold(0.0, f64::max);
            // integral of the fresh gradient squared over [tau_j, t]
            let mut cuts: Vec<f64> = vec![tau_j];
            cuts.extend(trace.events.iter().filter(|e| e.time > tau_j && e.time < t).map(|e| e.time));
            cuts.push(t);
            let mut int = 0.0;
            for w in cuts.windows(2) {
                let q = trace.point_at(0.5 * (w[0] + w[1]));
                let gj = obj.grad_coord(&q, j).unwrap();
                int += gj * gj * (w[1] - w[0]);
            }
            value -= params.c1 * int / gb[j];
            let sigma_j = paths.next_update(j, tau_j).filter(|&s| s >= t).unwrap_or(trace.horizon);
            for e in trace.events.iter().filter(|e| e.coord != j && e.time > tau_j && e.time < t) {
                let before = trace.point_at(e.time);
                let xi = params.xi.weight(&before, j, e.coord);
                let bx = paths.window_box(j, e.time, sigma_j, before[j]).unwrap();
                let h = obj.hessian_bound(e.coord, j, &bx).unwrap();
                let dp = e.value_after - e.value_before;
                value += xi * h * dp * dp / e.delta_t() * (2.0 - params.c2 * (t - e.time));
            }
        }
        value
    }

    #[test]
    fn matches_definition_between_events() {
        let obj = coupled();
        let params = spd_params();
        let mut rule = ConstantSteps::new(vec![5.005, 5.005], 2.0).unwrap();
        let cfg = RunConfig::new(SchedulePolicy::RandomGap { g_min: 0.3 }, StalenessPolicy::RandomInBox, 6.0, 9);
        let tr = run(&obj, &mut rule, &Point::new(vec![1.0, -0.4]).unwrap(), &cfg).unwrap();
        let series = potential_series(&tr, &obj, &params).unwrap();
        assert_relative_eq!(series.initial, obj.value(&tr.initial).unwrap());
        for w in tr.events.windows(2).take(12) {
            let mid = 0.5 * (w[0].time + w[1].time);
            let rec = series.records.iter().find(|r| r.seq == w[0].seq).unwrap();
            let next = series.records.iter().find(|r| r.seq == w[1].seq).unwrap();
            // linear in t between events, so the midpoint is the average of the two ends
            let interp = 0.5 * (rec.potential_after + next.potential_before);
            let direct = potential_at(&tr, &obj, &params, mid);
            assert_relative_eq!(interp, direct, epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn single_coordinate_has_no_credit() {
        let obj = Quad(vec![vec![3.0]]);
        let params = ControlParams::new(2.0 * 3.003 / 3.0, 1e-3, 1e-3, XiPolicy::Unit).unwrap();
        let mut rule = ConstantSteps::new(vec![3.003], 2.0).unwrap();
        let cfg = RunConfig::new(SchedulePolicy::RandomGap { g_min: 0.5 }, StalenessPolicy::Fresh, 10.0, 2);
        let tr = run(&obj, &mut rule, &Point::new(vec![2.0]).unwrap(), &cfg).unwrap();
        let s = potential_series(&tr, &obj, &params).unwrap();
        assert!(s.records.iter().all(|r| r.credit_before == 0.0 && r.credit_after == 0.0));
        assert!(check_update_monotonic(&s).is_empty());
        for r in &s.records {
            assert_relative_eq!(r.potential_after, r.phi_after - r.integral_after);
        }
    }

    #[test]
    fn hand_computed_two_event_trace() {
        // coordinate 0 steps at t = 0.5, coordinate 1 at t = 1; A = [[2,1],[1,2]], p0 = (1, 0)
        let obj = coupled();
        let params = spd_params();
        let mut tr = Trace::new(Point::new(vec![1.0, 0.0]).unwrap(), 1.0);
        let gamma = 5.005;
        let d0 = -2.0 / gamma * 0.5;
        tr.events.push(UpdateEvent {
            seq: 0, time: 0.5, coord: 0, tau: 0.0, view: None, g_tilde: 2.0, g_fresh: 2.0, gamma,
            delta_p: d0, value_before: 1.0, value_after: 1.0 + d0, phi_after: 0.0, aux: vec![],
        });
        let g1 = 1.0 + d0;
        let d1 = -g1 / gamma * 1.0;
        tr.events.push(UpdateEvent {
            seq: 1, time: 1.0, coord: 1, tau: 0.0, view: None, g_tilde: g1, g_fresh: g1, gamma,
            delta_p: d1, value_before: 0.0, value_after: d1, phi_after: 0.0, aux: vec![],
        });
        let s = potential_series(&tr, &obj, &params).unwrap();
        let (c1, c2) = (params.c1, params.c2);
        let x = 1.0 + d0;
        // after event 0: gap x², integrals over [0, 0.5] of g0 = 2 and g1 = 1 (coordinate 1 window)
        let phi_a = x * x;
        let int_a = c1 * (0.0 + 1.0 * 0.5) / gamma;
        let credit_a = 2.0 * 1.0 * d0 * d0 / 0.5;
        assert_relative_eq!(s.records[0].potential_after, phi_a - int_a + credit_a, max_relative = 1e-14);
        // before event 1: both integrals run on to t = 1 and the credit ages by 0.5
        let int_b = c1 * ((2.0 * x) * (2.0 * x) * 0.5 + 0.5 + x * x * 0.5) / gamma;
        let credit_b = d0 * d0 / 0.5 * (2.0 - c2 * 0.5);
        assert_relative_eq!(s.records[1].potential_before, phi_a - int_b + credit_b, max_relative = 1e-14);
        assert!(s.records[1].truncated);
    }

    #[test]
    fn controlled_runs_never_increase() {
        let obj = coupled();
        let params = spd_params();
        for (k, sched) in [
            SchedulePolicy::RoundRobin,
            SchedulePolicy::RandomGap { g_min: 0.1 },
            SchedulePolicy::BurstyAdversarial { target: 0, burst: 8 },
        ]
        .into_iter()
        .enumerate()
        {
            for stale in [StalenessPolicy::Fresh, StalenessPolicy::RandomInBox, StalenessPolicy::AdversarialInBox] {
                let mut rule = ConstantSteps::new(vec![5.005, 5.005], 2.0).unwrap();
                let cfg = RunConfig::new(sched, stale, 40.0, 3 + k as u64);
                let tr = run(&obj, &mut rule, &Point::new(vec![1.0, 0.3]).unwrap(), &cfg).unwrap();
                let a = analyze(&tr, &obj, &params).unwrap();
                assert!(check_update_monotonic(&a.series).is_empty(), "{sched} {stale}");
                assert!(a.series.records.iter().all(|r| r.gap_delta <= 0.0));
                assert!(a.conditions.iter().all(|c| c.curvature_ok && c.forward_ok && c.backward_ok));
            }
        }
    }

    #[test]
    fn uncoupled_conditions_have_zero_sums() {
        let obj = Quad(vec![vec![2.0, 0.0], vec![0.0, 3.0]]);
        let params = ControlParams::new(2.0, 0.1, 0.1, XiPolicy::Unit).unwrap();
        let mut rule = ConstantSteps::new(vec![2.0, 3.0], 2.0).unwrap();
        let cfg = RunConfig::new(SchedulePolicy::RoundRobin, StalenessPolicy::RandomInBox, 5.0, 1);
        let tr = run(&obj, &mut rule, &Point::new(vec![1.0, 1.0]).unwrap(), &cfg).unwrap();
        let c = check_conditions(&tr, &obj, &params).unwrap();
        assert!(c.iter().all(|r| r.forward_lhs == 0.0 && r.backward_lhs == 0.0 && r.curvature_ok));
    }

    #[test]
    fn example_condition_arithmetic() {
        let obj = coupled();
        let params = ControlParams::with_constants(2.0, 0.2, 0.2, 0.01, 0.5, XiPolicy::Unit).unwrap();
        let mut rule = ConstantSteps::new(vec![5.0, 5.0], 2.0).unwrap();
        let cfg = RunConfig::new(SchedulePolicy::RoundRobin, StalenessPolicy::Fresh, 4.0, 0);
        let tr = run(&obj, &mut rule, &Point::new(vec![1.0, 1.0]).unwrap(), &cfg).unwrap();
        let c = check_conditions(&tr, &obj, &params).unwrap();
        assert!(c.iter().all(|r| r.curvature_ok));
        assert!(c.iter().filter(|r| !r.truncated).all(|r| r.forward_lhs == 1.0 && r.forward_rhs == 1.0));
    }

    #[test]
    fn unfinished_trace_is_rejected() {
        let obj = coupled();
        let mut tr = Trace::new(Point::new(vec![1.0, 0.0]).unwrap(), 0.25);
        tr.events.push(UpdateEvent {
            seq: 0, time: 0.5, coord: 0, tau: 0.0, view: None, g_tilde: 0.0, g_fresh: 0.0, gamma: 1.0,
            delta_p: 0.0, value_before: 1.0, value_after: 1.0, phi_after: 0.0, aux: vec![],
        });
        assert!(potential_series(&tr, &obj, &spd_params()).is_err());
    }
}
