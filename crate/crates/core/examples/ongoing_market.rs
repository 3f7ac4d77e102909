// A market with continual supply: warehouses absorb imbalances and prices
// also respond to how far stocks sit from their targets.

use agdlab::markets::{lyapunov_ongoing, ongoing_states, run_tatonnement, MarketOptions, TatonnementMode};
use agdlab::presets::{ongoing_demo, random_gap};
use agdlab::{RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    let (market, p0, cfg) = ongoing_demo();
    let opts = MarketOptions {
        run: RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 2000.0, 5),
        mode: TatonnementMode::Ongoing(cfg.clone()),
        override_bounds: false,
        equilibrium: None,
    };
    let r = run_tatonnement(&market, &p0, &opts)?;
    let states = ongoing_states(&market, &r.trace, &cfg.v0)?;
    for t in [0, 10, 500, 1000, 2000] {
        let (p, v) = &states[t];
        let l = lyapunov_ongoing(&market, p, v, &[1.0, 1.0], &cfg.kappa, &cfg.lambda)?;
        println!("t={t:>4}: v = ({:+.4}, {:+.4}), lyapunov {l:.10}", v[0], v[1]);
    }
    println!("max |z| {:.2e}, max |kappa v| {:.2e}", r.max_excess, r.max_balance.unwrap_or(0.0));
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
