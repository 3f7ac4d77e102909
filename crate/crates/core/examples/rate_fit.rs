// Fit a geometric decay to the objective gap sampled at integer times.

use agdlab::linear::{solve_spd, SolveOptions};
use agdlab::monitor::{fit_rate, phi_at_integer_times, FitMode};
use agdlab::presets::{random_gap, spd_diagonally_dominant};
use agdlab::{Objective, Point, RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    let prob = spd_diagonally_dominant(10, 7);
    let cfg = RunConfig::new(random_gap(), StalenessPolicy::Stalest, 60.0, 4);
    let sol = solve_spd(&prob, &Point::zeros(prob.dim()), &SolveOptions::new(cfg))?;
    let phi = phi_at_integer_times(&sol.trace, &prob)?;
    let fit = fit_rate(&phi, FitMode::Linear)?;
    println!("gap at t=0,10,20: {:.2e} {:.2e} {:.2e}", phi[0], phi[10], phi[20]);
    println!(
        "least-squares decay {:.4}, envelope decay {:.4}, over {} samples",
        fit.delta.unwrap_or(f64::NAN),
        fit.envelope_decay.unwrap_or(f64::NAN),
        fit.samples
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
