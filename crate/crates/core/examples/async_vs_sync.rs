// Time to reach a residual target: asynchronous random-gap runs against synchronous
// rounds with the same step parameters, and against an exact coordinate sweep.

use agdlab::linear::{solve_spd, time_to_residual, SolveOptions};
use agdlab::presets::{random_gap, spd_suite};
use agdlab::{run_synchronous_baseline, Objective, Point, RunConfig, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    for (name, prob) in spd_suite() {
        let n = prob.dim();
        let same = run_synchronous_baseline(&prob, &Point::zeros(n), &prob.safe_gammas(2.0)?, 200)?;
        let diag: Vec<f64> = (0..n).map(|j| prob.matrix()[(j, j)]).collect();
        let exact = run_synchronous_baseline(&prob, &Point::zeros(n), &diag, 200)?;
        let cfg = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 200.0, 0);
        let sol = solve_spd(&prob, &Point::zeros(n), &SolveOptions::new(cfg))?;
        let t = |tr| time_to_residual(&prob, tr, 1e-6).unwrap_or(f64::INFINITY);
        let (ta, ts, te) = (t(&sol.trace), t(&same), t(&exact));
        println!("{name:>10}: async {ta:6.2}, same-step rounds {ts:5.1} ({:.2}x), exact sweep {te:4.1} ({:.2}x)", ta / ts, ta / te);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
