//! Choosing the stale point a coordinate reads its gradient at.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::objective::{CoordBox, Objective, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StalenessPolicy {
    /// The true current point.
    Fresh,
    /// The point as it stood at the coordinate's previous update.
    Stalest,
    /// Uniform over the continuous box.
    RandomInBox,
    /// The box point pushing the read gradient furthest from the fresh one.
    AdversarialInBox,
}

impl fmt::Display for StalenessPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StalenessPolicy::Fresh => "fresh",
            StalenessPolicy::Stalest => "stalest",
            StalenessPolicy::RandomInBox => "random_in_box",
            StalenessPolicy::AdversarialInBox => "adversarial_in_box",
        })
    }
}

/// Random candidates tried by the adversarial policy when the objective cannot locate extremes.
const SEARCH_SAMPLES: usize = 32;

/// Returns a point of `bx` according to `policy`.
///
/// `current` is the true point and `snapshot` the point at the previous update of the
/// pinned coordinate; both must lie in the box apart from the pinned entry.
pub fn stale_view(
    policy: StalenessPolicy,
    bx: &CoordBox,
    current: &Point,
    snapshot: &Point,
    obj: &dyn Objective,
    rng: &mut ChaCha8Rng,
) -> Result<Point> {
    let j = bx.pinned();
    let mut view = match policy {
        StalenessPolicy::Fresh => current.clone(),
        StalenessPolicy::Stalest => snapshot.clone(),
        StalenessPolicy::RandomInBox => {
            let mut v = bx.lower_corner();
            for k in bx.free_coords() {
                v[k] = rng.gen_range(bx.lo()[k]..=bx.hi()[k]);
            }
            v
        }
        StalenessPolicy::AdversarialInBox => adversarial(bx, current, obj, rng)?,
    };
    view[j] = bx.pinned_value();
    Ok(clamp_into(view, bx))
}

fn adversarial(bx: &CoordBox, current: &Point, obj: &dyn Objective, rng: &mut ChaCha8Rng) -> Result<Point> {
    let j = bx.pinned();
    if bx.free_coords().is_empty() {
        return Ok(current.clone());
    }
    let mut at_current = current.clone();
    at_current[j] = bx.pinned_value();
    let g = obj.grad_coord(&at_current, j)?;
    let candidates = match obj.grad_extreme_points(j, bx) {
        Some(pts) => {
            let (lo, hi) = pts?;
            vec![lo, hi]
        }
        None => {
            let mut c = vec![bx.lower_corner(), bx.upper_corner()];
            for _ in 0..SEARCH_SAMPLES {
                let mut v = bx.lower_corner();
                for k in bx.free_coords() {
                    v[k] = if rng.gen_bool(0.5) { bx.lo()[k] } else { bx.hi()[k] };
                }
                c.push(v);
            }
            c
        }
    };
    let mut best = at_current;
    let mut best_err = 0.0;
    for c in candidates {
        let gc = obj.grad_coord(&c, j)?;
        let err = (gc - g).abs();
        // ties go to the candidate that overshoots in the direction of g
        let better = err > best_err || (err == best_err && err > 0.0 && (gc - g) * g > 0.0);
        if better {
            best_err = err;
            best = c;
        }
    }
    Ok(best)
}

fn clamp_into(mut v: Point, bx: &CoordBox) -> Point {
    for k in 0..bx.dim() {
        v[k] = v[k].clamp(bx.lo()[k], bx.hi()[k]);
    }
    v
}
