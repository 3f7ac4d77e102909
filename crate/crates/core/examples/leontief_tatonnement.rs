// Tatonnement in Leontief markets, where equilibrium prices need not be unique.

use agdlab::markets::{run_tatonnement, MarketOptions, TatonnementMode, LAMBDA_MAX};
use agdlab::presets::{leontief_suite, random_gap};
use agdlab::{RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    for (name, market, p0) in leontief_suite() {
        let opts = MarketOptions {
            run: RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 3000.0, 2),
            mode: TatonnementMode::Standard { lambda: LAMBDA_MAX },
            override_bounds: false,
            equilibrium: None,
        };
        let r = run_tatonnement(&market, &p0, &opts)?;
        println!("{name}: max |z| {:.2e}, potential increases {}", r.max_excess, r.report.summary.potential_increases);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
