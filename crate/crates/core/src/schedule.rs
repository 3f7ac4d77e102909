//! Per-coordinate update-time generation.
//!
//! Times live on a dyadic grid (multiples of 2⁻³² time units) so that every
//! difference between two update times is computed exactly in `f64`. Base times
//! sit on a coarser grid and each coordinate is shifted by its own index in ticks,
//! which keeps all update times globally distinct.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest representable time step.
pub const TICK: f64 = 1.0 / 4_294_967_296.0;
const TICKS_PER_UNIT: u64 = 1 << 32;
/// Largest supported horizon.
pub const MAX_HORIZON: f64 = 1.0e4;
/// Cap on the number of update events in one schedule.
pub const MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SchedulePolicy {
    /// Every coordinate updates once near each integer time.
    SynchronousJitter,
    /// Coordinates take turns in equal slots of length `1/n`.
    RoundRobin,
    /// Independent gaps drawn uniformly from `[g_min, 1]`.
    RandomGap { g_min: f64 },
    /// The target updates once per unit; every other coordinate fires `burst`
    /// updates late in each of the target's gaps.
    BurstyAdversarial { target: usize, burst: usize },
}

impl fmt::Display for SchedulePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulePolicy::SynchronousJitter => write!(f, "synchronous_jitter"),
            SchedulePolicy::RoundRobin => write!(f, "round_robin"),
            SchedulePolicy::RandomGap { g_min } => write!(f, "random_gap(g_min={g_min})"),
            SchedulePolicy::BurstyAdversarial { target, burst } => {
                write!(f, "bursty_adversarial(target={target},burst={burst})")
            }
        }
    }
}

/// Sorted update times for every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<Vec<f64>>,
    horizon: f64,
    seed: u64,
    policy: Option<SchedulePolicy>,
}

impl Schedule {
    /// Wraps hand-built per-coordinate times. The caller is responsible for validity;
    /// see [`Schedule::violations`].
    pub fn from_times(times: Vec<Vec<f64>>, horizon: f64) -> Self {
        Schedule { times, horizon, seed: 0, policy: None }
    }

    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn policy(&self) -> Option<SchedulePolicy> {
        self.policy
    }

    pub fn times(&self, j: usize) -> &[f64] {
        &self.times[j]
    }

    pub fn len(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(time, coordinate)` pairs in increasing time order.
    pub fn events(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .times
            .iter()
            .enumerate()
            .flat_map(|(j, ts)| ts.iter().map(move |&t| (t, j)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    /// Human-readable list of timing-model violations; empty on a conforming schedule.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (j, ts) in self.times.iter().enumerate() {
            let mut prev = 0.0;
            for (q, &t) in ts.iter().enumerate() {
                let gap = t - prev;
                if !(gap > 0.0) {
                    out.push(format!("coordinate {j}: non-increasing time at update {q} (t={t})"));
                } else if gap > 1.0 {
                    out.push(format!("coordinate {j}: gap {gap} > 1 before update {q} (t={t})"));
                }
                prev = t;
            }
            if self.horizon - prev > 1.0 {
                out.push(format!("coordinate {j}: no update in final unit window (last at {prev})"));
            }
        }
        let ev = self.events();
        for w in ev.windows(2) {
            if w[0].0 == w[1].0 {
                out.push(format!(
                    "coordinates {} and {} share update time {}",
                    w[0].1, w[1].1, w[0].0
                ));
            }
        }
        out
    }
}

/// Generates a schedule for `n` coordinates over `[0, horizon]`, deterministic in `seed`.
pub fn generate_schedule(policy: SchedulePolicy, n: usize, horizon: f64, seed: u64) -> Result<Schedule> {
    if n == 0 {
        return Err(Error::InvalidInput("schedule needs at least one coordinate".into()));
    }
    if !(horizon > 0.0) || horizon > MAX_HORIZON {
        return Err(Error::InvalidInput(format!("horizon must lie in (0, {MAX_HORIZON}]")));
    }
    match policy {
        SchedulePolicy::RandomGap { g_min } if !(g_min > 0.0 && g_min <= 1.0) => {
            return Err(Error::InvalidInput(format!("g_min must lie in (0, 1], got {g_min}")));
        }
        SchedulePolicy::BurstyAdversarial { burst, .. } if burst < 2 => {
            return Err(Error::InvalidInput(format!("burst must be at least 2, got {burst}")));
        }
        SchedulePolicy::BurstyAdversarial { target, .. } if target >= n => {
            return Err(Error::InvalidInput(format!("target {target} out of range for n = {n}")));
        }
        _ => {}
    }

    let grid = grid_ticks(n);
    let unit = TICKS_PER_UNIT / grid; // grid slots per time unit
    let limit = (horizon * unit as f64).floor() as u64; // last admissible slot
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut offsets: Vec<u64> = (0..n as u64).collect();

    match policy {
        SchedulePolicy::SynchronousJitter => {
            // ordering within a round is a random permutation, realised through the tick offsets
            for s in slots.iter_mut() {
                let mut r = 1;
                while r * unit <= limit {
                    s.push(r * unit);
                    r += 1;
                }
            }
            offsets.shuffle(&mut rng);
        }
        SchedulePolicy::RoundRobin => {
            let mut s = 0u64;
            loop {
                let slot = (s + 1) * unit / n as u64;
                if slot > limit {
                    break;
                }
                slots[(s % n as u64) as usize].push(slot);
                s += 1;
            }
        }
        SchedulePolicy::RandomGap { g_min } => {
            let min_gap = ((g_min * unit as f64).ceil() as u64).clamp(1, unit);
            for s in slots.iter_mut() {
                let mut t = rng.gen_range(1..=unit);
                while t <= limit {
                    s.push(t);
                    t += rng.gen_range(min_gap..=unit);
                }
            }
        }
        SchedulePolicy::BurstyAdversarial { target, burst } => {
            let burst = burst as u64;
            let spacing = (unit / (4 * burst)).max(1);
            let mut r = 1;
            while (r - 1) * unit < limit {
                let gap_start = (r - 1) * unit;
                if r * unit <= limit {
                    slots[target].push(r * unit);
                }
                for (k, s) in slots.iter_mut().enumerate() {
                    if k == target {
                        continue;
                    }
                    let start = gap_start + unit / 2 + rng.gen_range(0..=unit / 8);
                    for q in 0..burst {
                        let t = start + q * spacing;
                        if t <= limit {
                            s.push(t);
                        }
                    }
                }
                r += 1;
            }
        }
    }

    let total: usize = slots.iter().map(Vec::len).sum();
    if total > MAX_EVENTS {
        return Err(Error::Schedule(format!("{total} events exceeds the cap of {MAX_EVENTS}")));
    }
    let times = slots
        .into_iter()
        .enumerate()
        .map(|(j, s)| s.into_iter().map(|slot| ((slot * grid - offsets[j]) as f64) * TICK).collect())
        .collect();
    Ok(Schedule { times, horizon, seed, policy: Some(policy) })
}

/// Ticks per base slot: a power of two larger than `n`, at least 1024.
fn grid_ticks(n: usize) -> u64 {
    ((n as u64) + 1).next_power_of_two().max(1024)
}
