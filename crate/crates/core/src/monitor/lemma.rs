use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tol;
use crate::error::{Error, Result};
use crate::objective::{CoordBox, Objective};
use crate::trace::{Paths, Trace};

/// Both gradient-spread inequalities for one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientErrorCheck {
    /// `g̃_max − g̃_min` over the window box.
    pub spread: f64,
    /// `|μ|·spread` against `2μ²·Σ_k H/η̄_k + Σ_i η_i·H·Δp²/Δt`.
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
    /// `spread²` against `8·(Σ_i η_i·H·Δp²/Δt)·(Σ_k H/η̄_k)`.
    pub lhs_squared: f64,
    pub rhs_squared: f64,
    pub ok_squared: bool,
    /// Extremes were sampled rather than exact.
    pub advisory: bool,
}

const CORNER_LIMIT: usize = 12;
const RANDOM_SAMPLES: usize = 1000;

fn sampled_extremes(obj: &dyn Objective, j: usize, bx: &CoordBox) -> Result<(f64, f64)> {
    let free = bx.free_coords();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |v: &crate::objective::Point| -> Result<()> {
        let g = obj.grad_coord(v, j)?;
        lo = lo.min(g);
        hi = hi.max(g);
        Ok(())
    };
    if free.len() <= CORNER_LIMIT {
        for mask in 0u32..(1 << free.len()) {
            let mut v = bx.lower_corner();
            for (b, &k) in free.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    v[k] = bx.hi()[k];
                }
            }
            visit(&v)?;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..RANDOM_SAMPLES {
            let mut v = bx.lower_corner();
            for &k in &free {
                v[k] = rng.gen_range(bx.lo()[k]..=bx.hi()[k]);
            }
            visit(&v)?;
        }
    }
    Ok((lo, hi))
}

/// Checks the gradient-spread inequalities for coordinate `j` over `[t1, t2]`.
///
/// The window must contain no update to `j`. `eta` holds one positive weight per
/// update of another coordinate inside the window, in time order.
pub fn check_gradient_error_bound(
    trace: &Trace,
    obj: &dyn Objective,
    j: usize,
    t1: f64,
    t2: f64,
    eta: &[f64],
    mu: f64,
) -> Result<GradientErrorCheck> {
    let n = trace.dim();
    let inside: Vec<_> = trace.events.iter().filter(|e| e.time > t1 && e.time < t2).collect();
    if inside.iter().any(|e| e.coord == j) {
        return Err(Error::InvalidInput(format!("window [{t1}, {t2}] contains an update to {j}")));
    }
    if eta.len() != inside.len() {
        return Err(Error::Dimension { expected: inside.len(), got: eta.len() });
    }
    if eta.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput("eta weights must be positive".into()));
    }
    let paths = Paths::new(trace);
    let s_j = paths.value_at(j, t2);
    let bx = paths.window_box(j, t1, t2, s_j)?;
    let (exact, (gmin, gmax)) = match obj.grad_extremes(j, &bx) {
        Some(r) => (true, r?),
        None => (false, sampled_extremes(obj, j, &bx)?),
    };
    let spread = gmax - gmin;

    let mut eta_bar = vec![f64::INFINITY; n];
    let mut v2 = 0.0;
    for (e, &w) in inside.iter().zip(eta) {
        eta_bar[e.coord] = eta_bar[e.coord].min(w);
        let bi = paths.window_box(j, e.time, t2, s_j)?;
        let dp = e.value_after - e.value_before;
        v2 += w * obj.hessian_bound(e.coord, j, &bi)? * dp * dp / e.delta_t();
    }
    let mut v1 = 0.0;
    for k in 0..n {
        if k != j && eta_bar[k].is_finite() {
            v1 += obj.hessian_bound(k, j, &bx)? / eta_bar[k];
        }
    }
    let lhs = mu.abs() * spread;
    let rhs = 2.0 * mu * mu * v1 + v2;
    let lhs_squared = spread * spread;
    let rhs_squared = 8.0 * v2 * v1;
    Ok(GradientErrorCheck {
        spread,
        lhs,
        rhs,
        ok: lhs <= rhs + tol(rhs),
        lhs_squared,
        rhs_squared,
        ok_squared: lhs_squared <= rhs_squared + tol(rhs_squared),
        advisory: !exact,
    })
}
