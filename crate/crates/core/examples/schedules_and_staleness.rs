// What the update schedules look like, and how stale a read can be.

use agdlab::{generate_schedule, SchedulePolicy};

pub fn run_example() -> agdlab::Result<()> {
    let policies = [
        SchedulePolicy::SynchronousJitter,
        SchedulePolicy::RoundRobin,
        SchedulePolicy::RandomGap { g_min: 0.25 },
        SchedulePolicy::BurstyAdversarial { target: 0, burst: 3 },
    ];
    for policy in policies {
        let s = generate_schedule(policy, 3, 3.0, 42)?;
        let first: Vec<String> = s.events().iter().take(7).map(|(t, j)| format!("{j}@{t:.3}")).collect();
        println!("{policy}: {} events; {}", s.len(), first.join(" "));
        assert!(s.violations().is_empty());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> agdlab::Result<()> {
    run_example()
}
