// Write a matrix and a run to disk, read both back, and verify the trace offline.

use agdlab::linear::{matrix_market_string, parse_matrix_market, solve_spd, SolveOptions};
use agdlab::monitor::monitor_trace;
use agdlab::presets::{random_gap, spd_diagonally_dominant};
use agdlab::{replay, Objective, Point, RunConfig, StalenessPolicy, Trace};

pub fn run_example() -> agdlab::Result<()> {
    let prob = spd_diagonally_dominant(6, 3);
    let text = matrix_market_string(prob.matrix());
    assert_eq!(&parse_matrix_market(&text, "memory")?, prob.matrix());

    let cfg = RunConfig::new(random_gap(), StalenessPolicy::RandomInBox, 30.0, 8);
    let sol = solve_spd(&prob, &Point::zeros(prob.dim()), &SolveOptions::new(cfg))?;
    let csv = sol.trace.to_csv_string()?;
    let back = Trace::read_csv(csv.as_bytes())?;
    let end = replay(&back)?;
    assert_eq!(end.to_vec(), sol.point.to_vec());

    let params = prob.control_params(&sol.gammas)?;
    let report = monitor_trace(&back, &prob, &params, None)?;
    println!("{} rows, {} bytes of CSV, replayed exactly; monitor clean: {}", back.events.len(), csv.len(), report.is_clean());
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
