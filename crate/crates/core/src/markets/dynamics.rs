use serde::{Deserialize, Serialize};

use super::demand::{excess_demand, market_potential, FisherMarket};
use crate::engine::{run, RunConfig, Step, UpdateRule};
use crate::error::{Error, Result};
use crate::monitor::{monitor_trace, ControlParams, FitMode, MonitorReport, XiPolicy};
use crate::objective::{Anchored, Objective, Point};
use crate::trace::Trace;

/// Largest tatonnement constant with a convergence guarantee.
pub const LAMBDA_MAX: f64 = 1.0 / 23.46;
/// Largest per-good constant for ongoing markets.
pub const ONGOING_LAMBDA_MAX: f64 = 1.0 / 60.0;
/// Largest `κ_j / λ_j`.
pub const KAPPA_RATIO_MAX: f64 = 0.1;
/// Largest `|κ_j v_j|` during a run.
pub const BALANCE_MAX: f64 = 0.1;

/// Monitor constants for market runs, with price-ratio cross weights.
pub fn market_control_params() -> ControlParams {
    ControlParams::new(6.0, 1.0 / 6.0, 1.0 / 5.0, XiPolicy::PriceRatio).expect("market constants are valid")
}

/// `p·(1 + λ·min{z̃, 1}·Δt)`.
pub fn tatonnement_step(p: f64, z_tilde: f64, lambda: f64, delta_t: f64) -> Result<f64> {
    check_step_inputs(p, lambda, delta_t)?;
    Ok(p * (1.0 + lambda * z_tilde.min(1.0) * delta_t))
}

/// `p·(1 + λ·min{z̃ − κv, 1}·Δt)`.
pub fn ongoing_step(p: f64, z_tilde: f64, v: f64, lambda: f64, kappa: f64, delta_t: f64) -> Result<f64> {
    check_step_inputs(p, lambda, delta_t)?;
    if (kappa * v).abs() > BALANCE_MAX {
        return Err(Error::BalanceBreach { event: 0, good: 0, value: (kappa * v).abs() });
    }
    Ok(p * (1.0 + lambda * (z_tilde - kappa * v).min(1.0) * delta_t))
}

fn check_step_inputs(p: f64, lambda: f64, delta_t: f64) -> Result<()> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("price {p} must be positive")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be positive")));
    }
    if !(delta_t > 0.0 && delta_t <= 1.0) {
        return Err(Error::Schedule(format!("time gap {delta_t} outside (0, 1]")));
    }
    Ok(())
}

/// `v − ∫ z dt` for `z` piecewise constant on consecutive `(duration, z)` pieces.
pub fn warehouse_integrate(v: f64, pieces: &[(f64, f64)]) -> f64 {
    v - pieces.iter().map(|(dt, z)| dt * z).sum::<f64>()
}

/// Rejects `λ` above [`LAMBDA_MAX`] unless overridden.
pub fn check_lambda(lambda: f64, override_bounds: bool) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be positive")));
    }
    if lambda > LAMBDA_MAX && !override_bounds {
        return Err(Error::InvalidInput(format!("lambda = {lambda} exceeds 1/23.46 (pass the override to run anyway)")));
    }
    Ok(())
}

/// Warehouse parameters for a market with continual supply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OngoingConfig {
    /// Warehouse capacities; offsets must stay within `±χ_j/2`.
    pub chi: Vec<f64>,
    pub v0: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl OngoingConfig {
    /// `κ_j = λ_j / 20` for every good.
    pub fn with_default_kappa(chi: Vec<f64>, v0: Vec<f64>, lambda: Vec<f64>) -> Self {
        let kappa = lambda.iter().map(|l| l / 20.0).collect();
        OngoingConfig { chi, v0, lambda, kappa }
    }

    pub fn validate(&self, goods: usize, override_bounds: bool) -> Result<()> {
        for (name, v) in [("chi", &self.chi), ("v0", &self.v0), ("lambda", &self.lambda), ("kappa", &self.kappa)] {
            if v.len() != goods {
                return Err(Error::InvalidInput(format!("{name} has {} entries for {goods} goods", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has a non-finite entry")));
            }
        }
        for j in 0..goods {
            let (chi, v, l, k) = (self.chi[j], self.v0[j], self.lambda[j], self.kappa[j]);
            if !(chi > 0.0 && l > 0.0 && k > 0.0) {
                return Err(Error::InvalidInput(format!("good {j}: chi, lambda and kappa must be positive")));
            }
            if l > ONGOING_LAMBDA_MAX && !override_bounds {
                return Err(Error::InvalidInput(format!("good {j}: lambda = {l} exceeds 1/60")));
            }
            if k / l > KAPPA_RATIO_MAX && !override_bounds {
                return Err(Error::InvalidInput(format!("good {j}: kappa/lambda = {} exceeds 1/10", k / l)));
            }
            if (k * v).abs() > BALANCE_MAX {
                return Err(Error::InvalidInput(format!("good {j}: |kappa*v0| = {} exceeds 1/10", (k * v).abs())));
            }
            if v.abs() > chi / 2.0 {
                return Err(Error::InvalidInput(format!("good {j}: |v0| = {} exceeds chi/2", v.abs())));
            }
        }
        Ok(())
    }
}

/// Per-good tatonnement as an update rule: drive `−z̃`, `γ = max{1, z̃}/(λp)`.
#[derive(Debug, Clone)]
pub struct TatonnementSteps {
    lambda: Vec<f64>,
    last_z_tilde: f64,
}

impl TatonnementSteps {
    pub fn new(lambda: Vec<f64>) -> Self {
        TatonnementSteps { lambda, last_z_tilde: 0.0 }
    }
}

impl UpdateRule for TatonnementSteps {
    fn name(&self) -> String {
        "tatonnement".into()
    }
    fn alpha(&self) -> f64 {
        6.0
    }
    fn step(&mut self, j: usize, _t: f64, current: &Point, g_tilde: f64) -> Result<Step> {
        let z = -g_tilde;
        self.last_z_tilde = z;
        Ok(Step { drive: g_tilde, gamma: z.max(1.0) / (self.lambda[j] * current[j]) })
    }
    fn aux_columns(&self) -> Vec<String> {
        vec!["z_tilde".into(), "z_fresh".into(), "v".into()]
    }
    fn aux(&self, obj: &dyn Objective, p_before: &Point, j: usize) -> Result<Vec<f64>> {
        Ok(vec![self.last_z_tilde, -obj.grad_coord(p_before, j)?, 0.0])
    }
}

/// Ongoing-market rule with warehouse offsets integrated between events.
#[derive(Debug, Clone)]
pub struct OngoingSteps {
    cfg: OngoingConfig,
    v: Vec<f64>,
    last_z_tilde: f64,
    max_balance: f64,
    max_offset: f64,
}

impl OngoingSteps {
    pub fn new(cfg: OngoingConfig) -> Self {
        let v = cfg.v0.clone();
        OngoingSteps { cfg, v, last_z_tilde: 0.0, max_balance: 0.0, max_offset: 0.0 }
    }

    pub fn offsets(&self) -> &[f64] {
        &self.v
    }

    /// Largest `|κ_j v_j|` seen so far.
    pub fn max_balance(&self) -> f64 {
        self.max_balance
    }

    fn check(&mut self) -> Result<()> {
        for j in 0..self.v.len() {
            let b = (self.cfg.kappa[j] * self.v[j]).abs();
            self.max_balance = self.max_balance.max(b);
            self.max_offset = self.max_offset.max(self.v[j].abs());
            if b > BALANCE_MAX {
                return Err(Error::BalanceBreach { event: 0, good: j, value: b });
            }
            if self.v[j].abs() > self.cfg.chi[j] / 2.0 {
                return Err(Error::CapacityBreach { event: 0, good: j, value: self.v[j] });
            }
        }
        Ok(())
    }
}

impl UpdateRule for OngoingSteps {
    fn name(&self) -> String {
        "ongoing".into()
    }
    fn alpha(&self) -> f64 {
        6.0
    }
    fn init(&mut self, _obj: &dyn Objective, _p0: &Point) -> Result<()> {
        self.v = self.cfg.v0.clone();
        self.check()
    }
    fn advance(&mut self, obj: &dyn Objective, p: &Point, from: f64, to: f64) -> Result<()> {
        if to > from {
            // ∇φ = −z, so dv/dt = −z = ∇φ
            let g = obj.gradient(p)?;
            for (v, gj) in self.v.iter_mut().zip(g) {
                *v = warehouse_integrate(*v, &[(to - from, -gj)]);
            }
        }
        self.check()
    }
    fn step(&mut self, j: usize, _t: f64, current: &Point, g_tilde: f64) -> Result<Step> {
        let z = -g_tilde;
        self.last_z_tilde = z;
        let net = z - self.cfg.kappa[j] * self.v[j];
        Ok(Step { drive: -net, gamma: net.max(1.0) / (self.cfg.lambda[j] * current[j]) })
    }
    fn aux_columns(&self) -> Vec<String> {
        vec!["z_tilde".into(), "z_fresh".into(), "v".into()]
    }
    fn aux(&self, obj: &dyn Objective, p_before: &Point, j: usize) -> Result<Vec<f64>> {
        Ok(vec![self.last_z_tilde, -obj.grad_coord(p_before, j)?, self.v[j]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TatonnementMode {
    /// Rule with a single `λ` for every good.
    Standard { lambda: f64 },
    Ongoing(OngoingConfig),
}

#[derive(Debug, Clone)]
pub struct MarketOptions {
    pub run: RunConfig,
    pub mode: TatonnementMode,
    pub override_bounds: bool,
    /// Known equilibrium prices; enables gap-based monitoring and rate fitting.
    pub equilibrium: Option<Point>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarketRun {
    pub prices: Point,
    #[serde(skip)]
    pub trace: Trace,
    pub report: MonitorReport,
    pub max_excess: f64,
    /// Final warehouse offsets (ongoing mode).
    pub offsets: Option<Vec<f64>>,
    pub max_balance: Option<f64>,
    /// `max{max_j p⁰_j, 2Σ_i e_i}`.
    pub price_cap: f64,
    pub max_price: f64,
}

/// Runs asynchronous tatonnement and monitors the trace.
pub fn run_tatonnement<M: FisherMarket + Objective>(market: &M, p0: &Point, opts: &MarketOptions) -> Result<MarketRun> {
    let n = market.goods();
    market.check_domain(p0)?;
    let (trace, offsets, max_balance) = match &opts.mode {
        TatonnementMode::Standard { lambda } => {
            check_lambda(*lambda, opts.override_bounds)?;
            let mut rule = TatonnementSteps::new(vec![*lambda; n]);
            (run(market, &mut rule, p0, &opts.run)?, None, None)
        }
        TatonnementMode::Ongoing(cfg) => {
            cfg.validate(n, opts.override_bounds)?;
            let mut rule = OngoingSteps::new(cfg.clone());
            let tr = run(market, &mut rule, p0, &opts.run)?;
            (tr, Some(rule.v.clone()), Some(rule.max_balance))
        }
    };
    let params = market_control_params();
    let report = match &opts.equilibrium {
        Some(star) => {
            let anchored = Anchored { inner: market, min: market_potential(market, star)? };
            let mode = matches!(opts.mode, TatonnementMode::Standard { .. }).then_some(FitMode::Linear);
            monitor_trace(&trace, &anchored, &params, mode)?
        }
        None => monitor_trace(&trace, market, &params, None)?,
    };
    let prices = trace.final_point();
    let max_excess = excess_demand(market, &prices)?.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let price_cap = p0.iter().copied().fold(2.0 * market.total_budget(), f64::max);
    let max_price = trace.events.iter().map(|e| e.value_after).fold(p0.iter().copied().fold(0.0, f64::max), f64::max);
    Ok(MarketRun { prices, trace, report, max_excess, offsets, max_balance, price_cap, max_price })
}

/// Round limit for [`equilibrium_oracle`].
pub const ORACLE_MAX_ROUNDS: usize = 10_000_000;
const ORACLE_LAMBDA: f64 = 1e-3;
const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub prices: Point,
    pub excess: Vec<f64>,
    pub rounds: usize,
}

/// Synchronous tatonnement with fresh demands from uniform prices until `max|z| < 1e-10`.
pub fn equilibrium_oracle(market: &dyn FisherMarket) -> Result<Equilibrium> {
    let n = market.goods();
    let mut p = vec![market.total_budget() / n as f64; n];
    for rounds in 0..ORACLE_MAX_ROUNDS {
        let z = excess_demand(market, &p)?;
        if z.iter().all(|z| z.abs() < ORACLE_TOL) {
            return Ok(Equilibrium { prices: Point::new(p)?, excess: z, rounds });
        }
        for (pj, zj) in p.iter_mut().zip(&z) {
            *pj *= 1.0 + ORACLE_LAMBDA * zj.min(1.0);
        }
    }
    Err(Error::NonConvergence(format!("equilibrium oracle exceeded {ORACLE_MAX_ROUNDS} rounds")))
}

/// `φ(p) + Σ_j κ_j λ_j p*_j v_j²`.
pub fn lyapunov_ongoing(
    market: &dyn FisherMarket,
    p: &[f64],
    v: &[f64],
    p_star: &[f64],
    kappa: &[f64],
    lambda: &[f64],
) -> Result<f64> {
    let n = market.goods();
    for s in [v, p_star, kappa, lambda] {
        if s.len() != n {
            return Err(Error::Dimension { expected: n, got: s.len() });
        }
    }
    let stock: f64 = (0..n).map(|j| kappa[j] * lambda[j] * p_star[j] * v[j] * v[j]).sum();
    Ok(market_potential(market, p)? + stock)
}

/// Prices and warehouse offsets at `t = 0, 1, …, ⌊horizon⌋` of an ongoing-market trace.
///
/// Offsets are re-integrated from the recorded prices, so the result depends only on the trace.
pub fn ongoing_states(market: &dyn FisherMarket, trace: &Trace, v0: &[f64]) -> Result<Vec<(Point, Vec<f64>)>> {
    let mut p = trace.initial.clone();
    let mut v = v0.to_vec();
    let mut clock = 0.0;
    let mut out = vec![(p.clone(), v.clone())];
    let mut events = trace.events.iter().peekable();
    let last = trace.horizon.floor() as usize;
    let flow = |p: &Point, v: &mut Vec<f64>, dt: f64| -> Result<()> {
        let z = excess_demand(market, p)?;
        for (vj, zj) in v.iter_mut().zip(z) {
            *vj = warehouse_integrate(*vj, &[(dt, zj)]);
        }
        Ok(())
    };
    for t in 1..=last {
        let tf = t as f64;
        while let Some(e) = events.next_if(|e| e.time <= tf) {
            flow(&p, &mut v, e.time - clock)?;
            clock = e.time;
            p[e.coord] = e.value_after;
        }
        flow(&p, &mut v, tf - clock)?;
        clock = tf;
        out.push((p.clone(), v.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::demand::{CesBuyer, CesMarket, LeontiefBuyer, LeontiefMarket};
    use crate::schedule::SchedulePolicy;
    use crate::staleness::StalenessPolicy;
    use approx::assert_relative_eq;

    #[test]
    fn step_examples() {
        assert_eq!(tatonnement_step(1.3, 0.0, LAMBDA_MAX, 0.7).unwrap(), 1.3);
        assert_relative_eq!(tatonnement_step(1.0, 3.0, LAMBDA_MAX, 1.0).unwrap(), 1.042625745950554, max_relative = 1e-12);
        assert_relative_eq!(tatonnement_step(1.0, 0.5, LAMBDA_MAX, 1.0).unwrap(), 1.021312872975277, max_relative = 1e-12);
        assert_eq!(ongoing_step(1.2, 0.4, 0.0, 0.01, 0.001, 0.5).unwrap(), tatonnement_step(1.2, 0.4, 0.01, 0.5).unwrap());
        assert!(ongoing_step(1.0, 0.0, 2.0, 1.0 / 60.0, 1.0 / 1200.0, 1.0).unwrap() < 1.0);
        assert_relative_eq!(ongoing_step(1.0, 0.2, 1.0, 1.0 / 60.0, 0.05, 1.0).unwrap(), 1.0025, max_relative = 1e-12);
        assert!(matches!(ongoing_step(1.0, 0.0, 3.0, 0.01, 0.05, 1.0), Err(Error::BalanceBreach { .. })));
    }

    #[test]
    fn gamma_form_matches_multiplicative_step() {
        for z in [-0.9, -0.2, 0.0, 0.3, 1.0, 4.0] {
            let mut rule = TatonnementSteps::new(vec![LAMBDA_MAX]);
            let p = Point::new(vec![0.8]).unwrap();
            let s = rule.step(0, 0.5, &p, -z).unwrap();
            let additive = p[0] - s.drive / s.gamma * 0.5;
            assert_relative_eq!(additive, tatonnement_step(0.8, z, LAMBDA_MAX, 0.5).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn warehouse_examples() {
        assert_eq!(warehouse_integrate(0.3, &[(1.0, 0.0)]), 0.3);
        assert_eq!(warehouse_integrate(0.0, &[(1.0, 0.5)]), -0.5);
        assert_eq!(warehouse_integrate(0.2, &[(0.3, 1.0), (0.3, -1.0)]), 0.2);
    }

    #[test]
    fn lambda_bound() {
        assert!(check_lambda(0.1, false).is_err());
        assert!(check_lambda(0.1, true).is_ok());
        assert!(check_lambda(LAMBDA_MAX, false).is_ok());
    }

    #[test]
    fn ongoing_config_bounds() {
        let ok = OngoingConfig::with_default_kappa(vec![1.0; 2], vec![0.04, -0.03], vec![1.0 / 60.0; 2]);
        assert!(ok.validate(2, false).is_ok());
        let mut coupled_kappa = ok.clone();
        coupled_kappa.kappa = coupled_kappa.lambda.clone();
        assert!(coupled_kappa.validate(2, false).is_err());
        let mut fast_lambda = ok.clone();
        fast_lambda.lambda = vec![0.1; 2];
        fast_lambda.kappa = vec![0.005; 2];
        assert!(fast_lambda.validate(2, false).is_err());
        let mut cap = ok;
        cap.v0 = vec![0.6, 0.0];
        assert!(cap.validate(2, false).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let m = CesMarket::new(2, vec![CesBuyer { e: 2.0, rho: -1.0, a: vec![1.0, 1.0] }]).unwrap();
        let star = [1.0, 1.0];
        let base = market_potential(&m, &star).unwrap();
        assert_eq!(lyapunov_ongoing(&m, &star, &[0.0, 0.0], &star, &[0.1; 2], &[0.01; 2]).unwrap(), base);
        let with = lyapunov_ongoing(&m, &star, &[2.0, 0.0], &star, &[0.1, 0.1], &[0.01, 0.01]).unwrap();
        assert_relative_eq!(with - base, 0.004, max_relative = 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let leo = LeontiefMarket::new(2, vec![
            LeontiefBuyer { e: 0.6, goods: vec![0], b: vec![1.0] },
            LeontiefBuyer { e: 0.4, goods: vec![1], b: vec![1.0] },
        ])
        .unwrap();
        let eq = equilibrium_oracle(&leo).unwrap();
        assert!((eq.prices[0] - 0.6).abs() < 1e-9 && (eq.prices[1] - 0.4).abs() < 1e-9);
        let sym = CesMarket::new(2, vec![CesBuyer { e: 2.0, rho: -1.0, a: vec![1.0, 1.0] }]).unwrap();
        let eq = equilibrium_oracle(&sym).unwrap();
        assert!((eq.prices[0] - 1.0).abs() < 1e-9);
        let cont = LeontiefMarket::new(2, vec![LeontiefBuyer { e: 1.0, goods: vec![0, 1], b: vec![1.0, 1.0] }]).unwrap();
        let eq = equilibrium_oracle(&cont).unwrap();
        assert!((eq.prices[0] + eq.prices[1] - 1.0).abs() < 1e-9);
        assert!(eq.excess.iter().all(|z| z.abs() < 1e-10));
    }

    #[test]
    fn async_runs_reach_known_equilibria() {
        let cfg = RunConfig::new(SchedulePolicy::RandomGap { g_min: 0.1 }, StalenessPolicy::RandomInBox, 2000.0, 3);
        let leo = LeontiefMarket::new(2, vec![
            LeontiefBuyer { e: 0.6, goods: vec![0], b: vec![1.0] },
            LeontiefBuyer { e: 0.4, goods: vec![1], b: vec![1.0] },
        ])
        .unwrap();
        let opts = MarketOptions { run: cfg, mode: TatonnementMode::Standard { lambda: LAMBDA_MAX }, override_bounds: false, equilibrium: None };
        let r = run_tatonnement(&leo, &Point::new(vec![1.0, 1.0]).unwrap(), &opts).unwrap();
        assert!((r.prices[0] - 0.6).abs() < 1e-4 && (r.prices[1] - 0.4).abs() < 1e-4, "{:?}", r.prices);

        let sym = CesMarket::new(2, vec![CesBuyer { e: 2.0, rho: -1.0, a: vec![1.0, 1.0] }]).unwrap();
        let r = run_tatonnement(&sym, &Point::new(vec![0.7, 1.3]).unwrap(), &opts).unwrap();
        assert!(r.max_excess < 1e-6, "{}", r.max_excess);
        assert!(r.report.is_clean(), "{:?}", r.report.summary);
    }

    #[test]
    fn override_required_for_large_lambda() {
        let sym = CesMarket::new(2, vec![CesBuyer { e: 2.0, rho: -1.0, a: vec![1.0, 1.0] }]).unwrap();
        let cfg = RunConfig::new(SchedulePolicy::RoundRobin, StalenessPolicy::Fresh, 5.0, 0);
        let mut opts = MarketOptions { run: cfg, mode: TatonnementMode::Standard { lambda: 0.1 }, override_bounds: false, equilibrium: None };
        assert!(run_tatonnement(&sym, &Point::new(vec![1.0, 1.0]).unwrap(), &opts).is_err());
        opts.override_bounds = true;
        assert!(run_tatonnement(&sym, &Point::new(vec![1.0, 1.0]).unwrap(), &opts).is_ok());
    }
}
