// Acceptance suite. Each criterion prints one PASS/FAIL line; any FAIL exits non-zero.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};

use clap::Parser;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use agdlab::cli::{execute, Cli};
use agdlab::linear::{solve_composite, solve_spd, time_to_residual, GramCache, SolveOptions, SpdProblem};
use agdlab::markets::{
    aggregate_demand, demand, equilibrium_oracle, excess_demand, lyapunov_ongoing, market_potential, ongoing_states,
    run_tatonnement, FisherMarket, MarketOptions, MarketRun, TatonnementMode, BALANCE_MAX, KAPPA_RATIO_MAX, LAMBDA_MAX,
};
use agdlab::monitor::{check_gradient_error_bound, fit_rate, phi_at_integer_times, FitMode, MonitorReport, FIT_FLOOR};
use agdlab::presets::{
    adversarial_preset, ces_suite, ces_symmetric, composite_random, leontief_suite, ongoing_demo, random_gap,
    spd_coupled, spd_diagonally_dominant, spd_suite,
};
use agdlab::{run_synchronous_baseline, Objective, Point, RunConfig, SchedulePolicy, StalenessPolicy, Trace};

// pinned tolerances
const MONO_TOL: f64 = 1e-9;
const RESIDUAL_TARGET: f64 = 1e-8;
const RATE_HORIZON: f64 = 200.0;
const PARITY_THRESHOLD: f64 = 1e-6;
const PARITY_BAR: f64 = 8.0;
const CACHE_UPDATES: usize = 10_000;
const CACHE_TOL: f64 = 1e-10;
const FD_TOL: f64 = 1e-6;
const WALRAS_TOL: f64 = 1e-10;
const BUDGET_TOL: f64 = 1e-12;
const RATIO_TOL: f64 = 1e-12;
const SURROGATE_SLACK: f64 = 1e-10;
const CES_HORIZON: f64 = 2000.0;
const CES_EXCESS: f64 = 1e-6;
const CES_PRICE_REL: f64 = 1e-4;
const DRIFT_LO: f64 = 0.81;
const DRIFT_HI: f64 = 1.21;
const LEONTIEF_HORIZON: f64 = 5000.0;
const LEONTIEF_EXCESS: f64 = 1e-4;
const ONGOING_HORIZON: f64 = 2000.0;
const ONGOING_OFFSET: f64 = 1e-2;
const ONGOING_EXCESS: f64 = 1e-3;
const ONGOING_BURN_IN: usize = 10;
const OFFSET_AGREE: f64 = 1e-9;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mono_tol(x: f64) -> f64 {
    MONO_TOL * x.abs().max(1.0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Recounts potential rises at untruncated updates and over gaps straight from the records.
fn potential_rises(report: &MonitorReport) -> (usize, usize, usize) {
    let mut at_updates = 0;
    let mut over_gaps = 0;
    let mut truncated = 0;
    for r in &report.potential {
        if r.truncated {
            truncated += 1;
        } else if r.potential_after > r.potential_before + mono_tol(r.potential_before) {
            at_updates += 1;
        }
        if r.gap_delta > mono_tol(r.potential_before) {
            over_gaps += 1;
        }
    }
    (at_updates, over_gaps, truncated)
}

fn market_opts(run: RunConfig, mode: TatonnementMode, equilibrium: Option<Point>) -> MarketOptions {
    MarketOptions { run, mode, override_bounds: false, equilibrium }
}

// 1
fn potential_monotonicity() -> Outcome {
    let schedules = [SchedulePolicy::RoundRobin, random_gap(), SchedulePolicy::BurstyAdversarial { target: 0, burst: 4 }];
    let stalenesses = [StalenessPolicy::Fresh, StalenessPolicy::RandomInBox, StalenessPolicy::AdversarialInBox];
    let coupled = spd_coupled();
    let dominant = spd_diagonally_dominant(50, 11);
    let composite = composite_random(12, 8, 3);
    let ces = ces_symmetric();
    let ces_star = equilibrium_oracle(&ces).map_err(|e| e.to_string())?.prices;

    let mut failures = Vec::new();
    let (mut events, mut truncated) = (0, 0);
    for i in 0..20usize {
        let schedule = schedules[i % 3];
        let staleness = stalenesses[(i / 4) % 3];
        let seed = 100 + i as u64;
        let (label, report) = match i % 4 {
            0 => {
                let cfg = RunConfig::new(schedule, staleness, 100.0, seed);
                let s = solve_spd(&coupled, &Point::new(vec![1.0, 4.0]).unwrap(), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
                ("spd2", s.report)
            }
            1 => {
                let cfg = RunConfig::new(schedule, staleness, 40.0, seed);
                let s = solve_spd(&dominant, &Point::zeros(50), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
                ("spd50", s.report)
            }
            2 => {
                let cfg = RunConfig::new(schedule, staleness, 100.0, seed);
                let s = solve_composite(&composite, &Point::zeros(8), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
                ("composite", s.report)
            }
            _ => {
                let cfg = RunConfig::new(schedule, staleness, 300.0, seed);
                let opts = market_opts(cfg, TatonnementMode::Standard { lambda: LAMBDA_MAX }, Some(ces_star.clone()));
                let r = run_tatonnement(&ces, &Point::new(vec![0.7, 1.3]).unwrap(), &opts).map_err(|e| e.to_string())?;
                ("ces", r.report)
            }
        };
        let (up, gap, tr) = potential_rises(&report);
        events += report.summary.events;
        truncated += tr;
        let counted = report.summary.potential_increases + report.summary.gap_increases + report.summary.trace_violations;
        if up + gap + counted > 0 {
            failures.push(format!("{label}/{}/{:?}: {up} update rises, {gap} gap rises", report.schedule, staleness));
        }
    }
    check(
        failures.is_empty(),
        format!("20 runs, {events} updates ({truncated} truncated at the horizon), rises: {failures:?}"),
    )
}

// 2
fn bad_updates_amortized() -> Outcome {
    let (prob, p0, cfg) = adversarial_preset();
    let s = solve_spd(&prob, &p0, &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
    let bad: Vec<usize> =
        s.report.potential.iter().filter(|r| r.phi_after > r.phi_before && !r.truncated).map(|r| r.seq).collect();
    let (up, gap, _) = potential_rises(&s.report);
    check(
        !bad.is_empty() && up == 0 && gap == 0 && s.report.is_clean(),
        format!("objective rose at events {bad:?}; potential rises {up} at updates, {gap} over gaps"),
    )
}

/// Gap `½(p − p*)ᵀA(p − p*)` with `p*` from a Cholesky solve.
fn spd_gap(a: &DMatrix<f64>, star: &DVector<f64>, p: &[f64]) -> f64 {
    let d = DVector::from_column_slice(p) - star;
    0.5 * d.dot(&(a * &d))
}

// 3
fn linear_rate() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, prob) in spd_suite() {
        let star = prob.matrix().clone().cholesky().expect("spd").solve(prob.rhs());
        for (k, schedule) in [random_gap(), SchedulePolicy::RoundRobin].into_iter().enumerate() {
            let cfg = RunConfig::new(schedule, StalenessPolicy::RandomInBox, RATE_HORIZON, 31 + k as u64);
            let s = solve_spd(&prob, &Point::zeros(prob.dim()), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
            let phi = phi_at_integer_times(&s.trace, &prob).map_err(|e| e.to_string())?;
            // independent gap at every integer time
            let mut p = s.trace.initial.to_vec();
            let mut events = s.trace.events.iter().peekable();
            for (t, &lib) in phi.iter().enumerate() {
                while let Some(e) = events.next_if(|e| e.time <= t as f64) {
                    p[e.coord] = e.value_after;
                }
                let mine = spd_gap(prob.matrix(), &star, &p);
                if (mine - lib).abs() > 1e-9 * mine.abs() + 1e-15 {
                    return Err(format!("{name}: gap oracle disagrees at t={t}: {mine:e} vs {lib:e}"));
                }
            }
            let fit = fit_rate(&phi, FitMode::Linear).map_err(|e| e.to_string())?;
            let delta = fit.envelope_decay.unwrap_or(0.0);
            // the envelope is checked down to the floating-point floor; below it φ must stay there
            let floor_at = phi.iter().position(|&v| v <= FIT_FLOOR).unwrap_or(phi.len());
            let envelope = phi[..floor_at]
                .iter()
                .enumerate()
                .all(|(t, &v)| v <= (1.0 - delta).powi(t as i32) * phi[0] * (1.0 + MONO_TOL));
            let stays = phi[floor_at..].iter().all(|&v| v <= FIT_FLOOR);
            let res = s.residual;
            let pass = delta > 0.0 && envelope && stays && res < RESIDUAL_TARGET;
            ok &= pass;
            lines.push(format!("{name}/{}: decay {delta:.3} residual {res:.1e}", if k == 0 { "gap" } else { "rr" }));
        }
    }
    check(ok, lines.join(", "))
}

// 4
fn parity() -> Outcome {
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for (name, prob) in spd_suite() {
        let n = prob.dim();
        let gammas = prob.safe_gammas(2.0).map_err(|e| e.to_string())?;
        let sync = run_synchronous_baseline(&prob, &Point::zeros(n), &gammas, 400).map_err(|e| e.to_string())?;
        let ts = time_to_residual(&prob, &sync, PARITY_THRESHOLD).ok_or(format!("{name}: baseline never reached target"))?;
        let diag: Vec<f64> = (0..n).map(|j| prob.matrix()[(j, j)]).collect();
        let exact = run_synchronous_baseline(&prob, &Point::zeros(n), &diag, 400).map_err(|e| e.to_string())?;
        let te = time_to_residual(&prob, &exact, PARITY_THRESHOLD).ok_or(format!("{name}: exact sweep never reached target"))?;
        let mut ratio = 0.0f64;
        for seed in 0..5 {
            let cfg = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 400.0, seed);
            let s = solve_spd(&prob, &Point::zeros(n), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
            let ta = time_to_residual(&prob, &s.trace, PARITY_THRESHOLD).ok_or(format!("{name}: async never reached target"))?;
            ratio = ratio.max(ta / ts);
        }
        worst = worst.max(ratio);
        lines.push(format!("{name} {ratio:.2}x (vs exact sweep {:.2}x)", ratio * ts / te));
    }
    check(worst <= PARITY_BAR, format!("worst of 5 seeds against same-step synchronous rounds: {}", lines.join(", ")))
}

// 5
fn gram_cache_fidelity() -> Outcome {
    let prob = composite_random(40, 20, 17);
    let p0 = Point::zeros(20);
    let cfg = RunConfig::new(random_gap(), StalenessPolicy::AdversarialInBox, 450.0, 3);
    let s = solve_composite(&prob, &p0, &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
    if s.trace.events.len() < CACHE_UPDATES {
        return Err(format!("only {} updates", s.trace.events.len()));
    }
    let run_steps: Vec<(usize, f64)> =
        s.trace.events.iter().take(CACHE_UPDATES).map(|e| (e.coord, e.value_after - e.value_before)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random_steps: Vec<(usize, f64)> = (0..CACHE_UPDATES).map(|_| (rng.gen_range(0..20), rng.gen_range(-1.0..1.0))).collect();

    let mut worst = 0.0f64;
    for steps in [&run_steps, &random_steps] {
        let mut cache = GramCache::new(&prob, &p0).map_err(|e| e.to_string())?;
        for &(k, d) in steps.iter() {
            cache.incremental_grad_update(&prob, k, d);
        }
        let p = Point::new(cache.point().to_vec()).map_err(|e| e.to_string())?;
        let direct = prob.gradient(&p).map_err(|e| e.to_string())?;
        let r = prob.residual(&p);
        let a = prob.matrix();
        for (j, (c, d)) in cache.gradients().iter().zip(&direct).enumerate() {
            // relative to the magnitudes that cancel inside the gradient
            let scale: f64 = (0..a.nrows()).map(|i| (a[(i, j)] * r[i]).abs()).sum::<f64>()
                + prob.terms()[j].derivative(p[j]).abs();
            worst = worst.max((c - d).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    check(worst <= CACHE_TOL, format!("{CACHE_UPDATES} run updates and {CACHE_UPDATES} random updates, worst relative error {worst:.2e}"))
}

fn sample_prices(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.2f64.ln()..5.0f64.ln()).exp()).collect()
}

// 6
fn market_identities() -> Outcome {
    let mut markets: Vec<Box<dyn FisherMarket>> = Vec::new();
    for (_, m, _) in ces_suite() {
        markets.push(Box::new(m));
    }
    for (_, m, _) in leontief_suite() {
        markets.push(Box::new(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let err = |e: agdlab::Error| e.to_string();

    let mut fd_worst = 0.0f64;
    for _ in 0..100 {
        let m = &markets[rng.gen_range(0..markets.len())];
        let p = sample_prices(&mut rng, m.goods());
        let j = rng.gen_range(0..m.goods());
        let h = 1e-5 * p[j];
        let (mut up, mut dn) = (p.clone(), p.clone());
        up[j] += h;
        dn[j] -= h;
        let fd = (market_potential(m.as_ref(), &up).map_err(err)? - market_potential(m.as_ref(), &dn).map_err(err)?) / (2.0 * h);
        let z = excess_demand(m.as_ref(), &p).map_err(err)?[j];
        fd_worst = fd_worst.max((fd + z).abs() / z.abs().max(1.0));
    }

    let (mut walras, mut budget, mut ratio_bad, mut surrogate_bad) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..1000 {
        let m = &markets[rng.gen_range(0..markets.len())];
        let n = m.goods();
        let p = sample_prices(&mut rng, n);
        let z = excess_demand(m.as_ref(), &p).map_err(err)?;
        let pz: f64 = p.iter().zip(&z).map(|(a, b)| a * b).sum();
        walras = walras.max((pz - (m.total_budget() - p.iter().sum::<f64>())).abs());
        for i in 0..m.buyers() {
            let x = demand(m.as_ref(), i, &p).map_err(err)?;
            let spent: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
            budget = budget.max((spent - m.budget(i)).abs() / m.budget(i));
        }

        let x = aggregate_demand(m.as_ref(), &p).map_err(err)?;
        let r1 = rng.gen_range(0.5..1.0);
        let r2 = rng.gen_range(1.0..2.0);
        let q: Vec<f64> = p.iter().map(|&pk| pk * rng.gen_range(r1..r2)).collect();
        let xq = aggregate_demand(m.as_ref(), &q).map_err(err)?;
        for j in 0..n {
            let slack = RATIO_TOL * x[j];
            if xq[j] < x[j] / r2 - slack || xq[j] > x[j] / r1 + slack {
                ratio_bad += 1;
            }
        }

        let j = rng.gen_range(0..n);
        let step = rng.gen_range(-1.0 / 6.0..=1.0 / 6.0) * p[j];
        let mut moved = p.clone();
        moved[j] += step;
        let lhs = market_potential(m.as_ref(), &moved).map_err(err)? - market_potential(m.as_ref(), &p).map_err(err)? + z[j] * step;
        if lhs > 1.5 * x[j] / p[j] * step * step + SURROGATE_SLACK {
            surrogate_bad += 1;
        }
    }
    check(
        fd_worst <= FD_TOL && walras <= WALRAS_TOL && budget <= BUDGET_TOL && ratio_bad == 0 && surrogate_bad == 0,
        format!(
            "gradient {fd_worst:.1e}, walras {walras:.1e}, budget {budget:.1e}, ratio-bound failures {ratio_bad}, surrogate failures {surrogate_bad}"
        ),
    )
}

/// Smallest and largest `p(s')/p(s)` over `s ≤ s' ≤ s + 1`, per good.
fn unit_window_drift(trace: &Trace) -> (f64, f64) {
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    for j in 0..trace.dim() {
        let mut path = vec![(0.0, trace.initial[j])];
        path.extend(trace.events.iter().filter(|e| e.coord == j).map(|e| (e.time, e.value_after)));
        for i in 0..path.len() {
            // value i holds until the next change, so any later value reached within one unit of that counts
            let until = path.get(i + 1).map_or(f64::INFINITY, |s| s.0) + 1.0;
            for later in path[i + 1..].iter().take_while(|s| s.0 <= until) {
                let r = later.1 / path[i].1;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    (lo, hi)
}

fn price_cap_held(run: &MarketRun) -> bool {
    run.trace.events.iter().all(|e| e.value_after <= run.price_cap)
}

// 7
fn ces_convergence() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, (name, market, p0)) in ces_suite().into_iter().enumerate() {
        let eq = equilibrium_oracle(&market).map_err(|e| e.to_string())?;
        let oracle_clears = max_abs(&excess_demand(&market, &eq.prices).map_err(|e| e.to_string())?) < 1e-9;
        let cfg = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, CES_HORIZON, 70 + k as u64);
        let opts = market_opts(cfg, TatonnementMode::Standard { lambda: LAMBDA_MAX }, Some(eq.prices.clone()));
        let r = run_tatonnement(&market, &p0, &opts).map_err(|e| e.to_string())?;
        let z = max_abs(&excess_demand(&market, &r.prices).map_err(|e| e.to_string())?);
        let rel = r.prices.iter().zip(eq.prices.iter()).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        let (lo, hi) = unit_window_drift(&r.trace);
        let s = &r.report.summary;
        let pass = oracle_clears
            && z < CES_EXCESS
            && rel < CES_PRICE_REL
            && lo >= DRIFT_LO
            && hi <= DRIFT_HI
            && price_cap_held(&r)
            && r.report.is_clean()
            && s.forward_failures + s.backward_failures == 0;
        ok &= pass;
        lines.push(format!(
            "{name}: |z| {z:.1e}, price err {rel:.1e}, drift [{lo:.3}, {hi:.3}], cross-curvature failures {}",
            s.forward_failures + s.backward_failures
        ));
    }
    check(ok, lines.join("; "))
}

// 8
fn leontief_convergence() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, (name, market, p0)) in leontief_suite().into_iter().enumerate() {
        let cfg = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, LEONTIEF_HORIZON, 80 + k as u64);
        let opts = market_opts(cfg, TatonnementMode::Standard { lambda: LAMBDA_MAX }, None);
        let r = run_tatonnement(&market, &p0, &opts).map_err(|e| e.to_string())?;
        let z = max_abs(&excess_demand(&market, &r.prices).map_err(|e| e.to_string())?);
        let (up, gap, _) = potential_rises(&r.report);
        let pass = z < LEONTIEF_EXCESS && up == 0 && r.report.summary.potential_increases == 0 && price_cap_held(&r);
        ok &= pass;
        lines.push(format!("{name}: |z| {z:.1e}, update rises {up}, gap rises {gap}"));
    }
    check(ok, lines.join("; "))
}

// 9
fn ongoing_market() -> Outcome {
    let (market, p0, cfg) = ongoing_demo();
    let err = |e: agdlab::Error| e.to_string();
    let ratio_ok = cfg.kappa.iter().zip(&cfg.lambda).all(|(k, l)| k / l <= KAPPA_RATIO_MAX);
    let run = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, ONGOING_HORIZON, 90);
    // a breach would abort the run with an error
    let r = run_tatonnement(&market, &p0, &market_opts(run, TatonnementMode::Ongoing(cfg.clone()), None)).map_err(err)?;

    // integrate the offsets independently: stock falls by the fresh excess demand between events
    let mut p = r.trace.initial.to_vec();
    let mut v = cfg.v0.clone();
    let mut clock = 0.0;
    let mut worst_stock = max_abs(&v);
    let mut worst_balance = cfg.kappa.iter().zip(&v).map(|(k, x)| (k * x).abs()).fold(0.0, f64::max);
    let mut worst_capacity = cfg.chi.iter().zip(&v).map(|(c, x)| x.abs() / (c / 2.0)).fold(0.0, f64::max);
    let flow = |p: &[f64], v: &mut Vec<f64>, dt: f64| -> Result<(), String> {
        let z = excess_demand(&market, p).map_err(err)?;
        for (vj, zj) in v.iter_mut().zip(z) {
            *vj -= zj * dt;
        }
        Ok(())
    };
    for e in &r.trace.events {
        flow(&p, &mut v, e.time - clock)?;
        clock = e.time;
        p[e.coord] = e.value_after;
        worst_stock = worst_stock.max(max_abs(&v));
        worst_balance = cfg.kappa.iter().zip(&v).map(|(k, x)| (k * x).abs()).fold(worst_balance, f64::max);
        worst_capacity = cfg.chi.iter().zip(&v).map(|(c, x)| x.abs() / (c / 2.0)).fold(worst_capacity, f64::max);
    }
    flow(&p, &mut v, r.trace.horizon - clock)?;
    let lib = r.offsets.clone().unwrap_or_default();
    let agree = v.iter().zip(&lib).all(|(a, b)| (a - b).abs() <= OFFSET_AGREE);

    let star = equilibrium_oracle(&market).map_err(err)?.prices;
    let states = ongoing_states(&market, &r.trace, &cfg.v0).map_err(err)?;
    let mut lyap = Vec::with_capacity(states.len());
    for (p, v) in &states {
        lyap.push(lyapunov_ongoing(&market, p, v, &star, &cfg.kappa, &cfg.lambda).map_err(err)?);
    }
    let rises = lyap[ONGOING_BURN_IN..].windows(2).filter(|w| w[1] > w[0] + mono_tol(w[0])).count();
    let z = max_abs(&excess_demand(&market, &r.prices).map_err(err)?);
    let v_end = max_abs(&v);
    check(
        v_end < ONGOING_OFFSET && z < ONGOING_EXCESS && rises == 0 && ratio_ok && worst_balance <= BALANCE_MAX && worst_capacity <= 1.0 && agree,
        format!(
            "final |v| {v_end:.2e}, |z| {z:.1e}, lyapunov rises after t={ONGOING_BURN_IN}: {rises}, \
             max |v| {worst_stock:.3}, max |kappa v| {worst_balance:.1e}, max |v|/(chi/2) {worst_capacity:.3}, offsets agree {agree}"
        ),
    )
}

// 10
fn gradient_error_inequalities() -> Outcome {
    let runs = [
        (spd_coupled(), SchedulePolicy::BurstyAdversarial { target: 0, burst: 4 }, StalenessPolicy::AdversarialInBox),
        (spd_diagonally_dominant(10, 7), random_gap(), StalenessPolicy::RandomInBox),
        (spd_diagonally_dominant(10, 7), SchedulePolicy::RoundRobin, StalenessPolicy::Stalest),
        (spd_coupled(), random_gap(), StalenessPolicy::Fresh),
    ];
    let mut traces: Vec<(SpdProblem, Trace)> = Vec::new();
    for (k, (prob, schedule, staleness)) in runs.into_iter().enumerate() {
        let cfg = RunConfig::new(schedule, staleness, 40.0, 200 + k as u64);
        let s = solve_spd(&prob, &Point::new(vec![1.0; prob.dim()]).unwrap(), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
        traces.push((prob, s.trace));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut samples, mut nonempty, mut violations, mut inexact) = (0, 0, 0, 0);
    while samples < 1000 {
        let (prob, trace) = &traces[rng.gen_range(0..traces.len())];
        let e = &trace.events[rng.gen_range(0..trace.events.len())];
        // any window inside (τ_j, t) holds no update of j
        let t1 = rng.gen_range(e.tau..e.time);
        let t2 = rng.gen_range(t1..e.time);
        let inside = trace.events.iter().filter(|x| x.time > t1 && x.time < t2).count();
        let eta: Vec<f64> = (0..inside).map(|_| rng.gen_range(0.1f64.ln()..10.0f64.ln()).exp()).collect();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mu = sign * rng.gen_range(0.01f64.ln()..100.0f64.ln()).exp();
        let c = check_gradient_error_bound(trace, prob, e.coord, t1, t2, &eta, mu).map_err(|e| e.to_string())?;
        samples += 1;
        nonempty += usize::from(inside > 0);
        inexact += usize::from(c.advisory);
        violations += usize::from(!c.ok) + usize::from(!c.ok_squared);
    }
    check(
        violations == 0 && inexact == 0,
        format!("{samples} tuples ({nonempty} with interleaved updates), {violations} violations, {inexact} with sampled extremes"),
    )
}

// 11
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let mut compared = 0;
    for (cmd, cfg) in [("solve-spd", "spd_coupled.toml"), ("solve-composite", "composite.toml"), ("market-ces", "ces.toml"), ("market-ongoing", "ongoing.toml")] {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{cfg}-{rep}"));
            let cli = Cli::try_parse_from(["agdlab", cmd, "--config", &format!("{data}/{cfg}"), "--out", out.to_str().unwrap()])
                .map_err(|e| e.to_string())?;
            let summary = execute(&cli).map_err(|e| e.to_string())?;
            if summary.exit_code != 0 {
                return Err(format!("{cmd} {cfg} exited {}", summary.exit_code));
            }
            let read = |f: &str| fs::read(out.join(f)).map_err(|e| e.to_string());
            outputs.push((read("trace.csv")?, read("monitor.json")?));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{cmd} {cfg}: artifacts differ between runs"));
        }
        compared += 2;
    }
    // library level, including the CSV round trip
    let cfg = RunConfig::new(random_gap(), StalenessPolicy::AdversarialInBox, 50.0, 77);
    let prob = spd_diagonally_dominant(10, 7);
    let a = solve_spd(&prob, &Point::zeros(10), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
    let b = solve_spd(&prob, &Point::zeros(10), &SolveOptions::new(cfg)).map_err(|e| e.to_string())?;
    let csv = a.trace.to_csv_string().map_err(|e| e.to_string())?;
    let same = csv == b.trace.to_csv_string().map_err(|e| e.to_string())?
        && a.report.to_json().map_err(|e| e.to_string())? == b.report.to_json().map_err(|e| e.to_string())?;
    let back = Trace::read_csv(csv.as_bytes()).map_err(|e| e.to_string())?;
    let replayed = agdlab::replay(&back).map_err(|e| e.to_string())?.to_vec() == a.point.to_vec();
    check(same && replayed, format!("{compared} CLI artifact pairs identical, library rerun identical {same}, CSV replay exact {replayed}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("potential monotonicity", potential_monotonicity),
        ("bad updates amortized", bad_updates_amortized),
        ("linear rate", linear_rate),
        ("async/sync parity", parity),
        ("gram cache fidelity", gram_cache_fidelity),
        ("market identities", market_identities),
        ("ces convergence", ces_convergence),
        ("leontief convergence", leontief_convergence),
        ("ongoing market", ongoing_market),
        ("gradient error inequalities", gradient_error_inequalities),
        ("determinism", determinism),
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                let f = *f;
                s.spawn(move || catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into())))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), outcome)) in criteria.iter().zip(&outcomes).enumerate() {
        match outcome {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d})", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
