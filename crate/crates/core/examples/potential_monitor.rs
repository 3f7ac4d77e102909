// A run where stale reads make an update raise the objective, yet the amortized
// potential still never goes up.

use agdlab::linear::{solve_spd, SolveOptions};
use agdlab::presets::adversarial_preset;

pub fn run_example() -> agdlab::Result<()> {
    let (prob, p0, cfg) = adversarial_preset();
    let sol = solve_spd(&prob, &p0, &SolveOptions::new(cfg))?;
    let s = &sol.report.summary;
    for r in sol.report.potential.iter().filter(|r| r.phi_after > r.phi_before) {
        println!(
            "event {}: objective {:.4e} -> {:.4e}, potential {:.4e} -> {:.4e}",
            r.seq, r.phi_before, r.phi_after, r.potential_before, r.potential_after
        );
    }
    println!("bad updates {}, potential increases {}", s.bad_updates, s.potential_increases);
    assert!(s.bad_updates >= 1 && s.potential_increases == 0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
