// Asynchronous price adjustment in complementary-CES Fisher markets.

use agdlab::markets::{equilibrium_oracle, run_tatonnement, MarketOptions, TatonnementMode, LAMBDA_MAX};
use agdlab::presets::{ces_suite, random_gap};
use agdlab::{RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    for (name, market, p0) in ces_suite().into_iter().take(3) {
        let eq = equilibrium_oracle(&market)?;
        let opts = MarketOptions {
            run: RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 2000.0, 1),
            mode: TatonnementMode::Standard { lambda: LAMBDA_MAX },
            override_bounds: false,
            equilibrium: Some(eq.prices.clone()),
        };
        let r = run_tatonnement(&market, &p0, &opts)?;
        println!("{name}: max |z| {:.2e}, prices {:?}, oracle {:?}", r.max_excess, r.prices.to_vec(), eq.prices.to_vec());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
