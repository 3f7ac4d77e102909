// Bound how far a stale gradient can be from any gradient seen during a window.

use agdlab::linear::{solve_spd, SolveOptions};
use agdlab::monitor::check_gradient_error_bound;
use agdlab::presets::spd_coupled;
use agdlab::{Point, RunConfig, SchedulePolicy, StalenessPolicy};

pub fn run_example() -> agdlab::Result<()> {
    let prob = spd_coupled();
    let cfg = RunConfig::new(SchedulePolicy::BurstyAdversarial { target: 0, burst: 3 }, StalenessPolicy::Fresh, 6.0, 0);
    let sol = solve_spd(&prob, &Point::new(vec![0.0, 3.0])?, &SolveOptions::new(cfg))?;
    // a window strictly between two updates of coordinate 0
    let ups: Vec<f64> = sol.trace.events.iter().filter(|e| e.coord == 0).map(|e| e.time).collect();
    let (t1, t2) = (ups[1], ups[2] - 1e-9);
    let inside = sol.trace.events.iter().filter(|e| e.time > t1 && e.time < t2).count();
    for mu in [0.1, 1.0, 10.0] {
        let c = check_gradient_error_bound(&sol.trace, &prob, 0, t1, t2, &vec![1.0; inside], mu)?;
        println!("mu {mu:>4}: {:.3e} <= {:.3e} ({}), squared {:.3e} <= {:.3e}", c.lhs, c.rhs, c.ok, c.lhs_squared, c.rhs_squared);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
