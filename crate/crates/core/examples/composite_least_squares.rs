// Robust least squares: pseudo-Huber and ridge terms on top of `½‖Ap − b‖²`,
// with gradient reads served from an incrementally maintained Gram cache.

use agdlab::linear::{solve_composite, SolveOptions};
use agdlab::presets::{composite_random, random_gap};
use agdlab::{Objective, Point, RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    let prob = composite_random(30, 20, 9);
    let cfg = RunConfig::new(random_gap(), StalenessPolicy::AdversarialInBox, 400.0, 2);
    let sol = solve_composite(&prob, &Point::zeros(prob.dim()), &SolveOptions::new(cfg))?;
    println!("composite 30x20: |grad|_inf {:.2e}, value {:.6}", sol.residual, prob.value(&sol.point)?);
    println!("monitor clean: {}", sol.report.is_clean());
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
