//! Asynchronous coordinate descent with bounded-staleness reads, simulated in continuous time.
//!
//! A run is a sequence of update events produced by a [`schedule`], each reading a
//! stale view of the point chosen by a [`staleness`] policy and stepping one coordinate.
//! The [`monitor`] replays finished traces through an amortized potential to check that
//! the step sizes keep the run under control.

pub mod cli;
pub mod config;
pub mod engine;
pub mod monitor;
pub mod error;
pub mod linear;
pub mod markets;
pub mod objective;
pub mod presets;
pub mod schedule;
pub mod staleness;
pub mod trace;

pub use engine::{compute_update, run, run_schedule, run_synchronous_baseline, ConstantSteps, FnSteps, RunConfig, Step, UpdateRule};
pub use error::{Error, Result};
pub use objective::{Anchored, CoordBox, Objective, Point};
pub use schedule::{generate_schedule, Schedule, SchedulePolicy};
pub use staleness::{stale_view, StalenessPolicy};
pub use trace::{replay, validate_trace, window_box, Trace, UpdateEvent};
