// Solve `Ap = b` for a symmetric positive definite `A` with asynchronous coordinate steps.

use agdlab::linear::{solve_spd, SolveOptions};
use agdlab::presets::{random_gap, spd_coupled, spd_diagonally_dominant};
use agdlab::{Objective, Point, RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    for (name, prob) in [("coupled 2x2", spd_coupled()), ("dominant 50x50", spd_diagonally_dominant(50, 11))] {
        let cfg = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 200.0, 1);
        let sol = solve_spd(&prob, &Point::zeros(prob.dim()), &SolveOptions::new(cfg))?;
        println!(
            "{name}: residual {:.2e} after {} updates, potential increases {}",
            sol.residual,
            sol.trace.events.len(),
            sol.report.summary.potential_increases
        );
        assert!(sol.converged && sol.report.is_clean());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
