//! Objective contract and the geometric primitives shared by every other module.
//!
//! An [`Objective`] is a twice-differentiable convex function exposed through
//! per-coordinate gradients and Hessian-magnitude bounds over [`CoordBox`]es.
//! Implementations are immutable after construction and can be shared across runs.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A coordinate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Builds a point, rejecting non-finite entries and empty vectors.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("point must have at least one coordinate".into()));
        }
        if let Some(k) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("coordinate {k} is not finite")));
        }
        Ok(Point(coords))
    }

    pub fn zeros(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Copy of `self` with coordinate `j` replaced.
    pub fn with_coord(&self, j: usize, value: f64) -> Point {
        let mut q = self.clone();
        q.0[j] = value;
        q
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Product of per-coordinate intervals with one coordinate pinned to a value.
///
/// This is the set of admissible stale views for an update to the pinned coordinate:
/// every other coordinate ranges over the values it attained in a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
    pinned: usize,
}

impl CoordBox {
    /// Builds a box from bounds; `lo[pinned]` and `hi[pinned]` are overwritten by `pinned_value`.
    pub fn new(mut lo: Vec<f64>, mut hi: Vec<f64>, pinned: usize, pinned_value: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension { expected: lo.len(), got: hi.len() });
        }
        if pinned >= lo.len() {
            return Err(Error::InvalidInput(format!("pinned coordinate {pinned} out of range")));
        }
        lo[pinned] = pinned_value;
        hi[pinned] = pinned_value;
        for k in 0..lo.len() {
            if !(lo[k] <= hi[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "box coordinate {k}: lo {} > hi {}",
                    lo[k], hi[k]
                )));
            }
        }
        Ok(CoordBox { lo, hi, pinned })
    }

    /// The single-point box `{p}` pinned at coordinate `j`.
    pub fn degenerate(p: &Point, j: usize) -> Self {
        CoordBox { lo: p.to_vec(), hi: p.to_vec(), pinned: j }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn pinned(&self) -> usize {
        self.pinned
    }

    pub fn pinned_value(&self) -> f64 {
        self.lo[self.pinned]
    }

    /// Widens coordinate `k` (not the pinned one) to include `value`.
    pub fn include(&mut self, k: usize, value: f64) {
        debug_assert_ne!(k, self.pinned);
        if value < self.lo[k] {
            self.lo[k] = value;
        }
        if value > self.hi[k] {
            self.hi[k] = value;
        }
    }

    pub fn lower_corner(&self) -> Point {
        Point(self.lo.clone())
    }

    pub fn upper_corner(&self) -> Point {
        Point(self.hi.clone())
    }

    pub fn contains(&self, p: &Point, rel_tol: f64) -> bool {
        p.len() == self.dim()
            && (0..self.dim()).all(|k| {
                let tol = rel_tol * self.lo[k].abs().max(self.hi[k].abs()).max(1.0);
                p[k] >= self.lo[k] - tol && p[k] <= self.hi[k] + tol
            })
    }

    /// True when `self` is contained in `other` (same pinned coordinate and value).
    pub fn is_subset_of(&self, other: &CoordBox) -> bool {
        self.dim() == other.dim()
            && self.pinned == other.pinned
            && (0..self.dim()).all(|k| self.lo[k] >= other.lo[k] && self.hi[k] <= other.hi[k])
    }

    /// Coordinates (other than the pinned one) whose interval has positive width.
    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| k != self.pinned && self.hi[k] > self.lo[k]).collect()
    }
}

/// The contract every minimized function satisfies.
///
/// Only [`dim`](Objective::dim), [`value`](Objective::value),
/// [`grad_coord`](Objective::grad_coord) and [`hessian_bound`](Objective::hessian_bound)
/// are required; the rest have conservative defaults.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Human-readable tag recorded in trace metadata.
    fn name(&self) -> String {
        "objective".to_string()
    }

    /// Rejects points outside the domain. The default accepts every finite point.
    fn check_domain(&self, p: &Point) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: p.len() });
        }
        if !p.is_finite() {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        Ok(())
    }

    fn value(&self, p: &Point) -> Result<f64>;

    fn grad_coord(&self, p: &Point, j: usize) -> Result<f64>;

    fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
        (0..self.dim()).map(|j| self.grad_coord(p, j)).collect()
    }

    /// Upper bound on `max |d²φ / dp_j dp_k|` over the box. Must be monotone in box inclusion.
    fn hessian_bound(&self, j: usize, k: usize, bx: &CoordBox) -> Result<f64>;

    /// True when `hessian_bound` does not depend on the box (quadratics).
    fn constant_hessian(&self) -> bool {
        false
    }

    /// Strong-convexity modulus, when known.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    /// Points of the box where `∇_j φ` is smallest and largest, when the objective can locate them.
    fn grad_extreme_points(&self, _j: usize, _bx: &CoordBox) -> Option<Result<(Point, Point)>> {
        None
    }

    /// Exact `(min, max)` of `∇_j φ` over the box, when the objective can compute it.
    fn grad_extremes(&self, j: usize, bx: &CoordBox) -> Option<Result<(f64, f64)>> {
        let pts = self.grad_extreme_points(j, bx)?;
        Some(pts.and_then(|(a, b)| Ok((self.grad_coord(&a, j)?, self.grad_coord(&b, j)?))))
    }

    /// Minimum value `φ*`, when known.
    fn min_value(&self) -> Option<f64> {
        None
    }

    /// `φ(p) − φ*`, when `φ*` is known. Implementations may override with a
    /// cancellation-free formula.
    fn optimality_gap(&self, p: &Point) -> Option<Result<f64>> {
        let m = self.min_value()?;
        Some(self.value(p).map(|v| (v - m).max(0.0)))
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn check_domain(&self, p: &Point) -> Result<()> {
        (**self).check_domain(p)
    }
    fn value(&self, p: &Point) -> Result<f64> {
        (**self).value(p)
    }
    fn grad_coord(&self, p: &Point, j: usize) -> Result<f64> {
        (**self).grad_coord(p, j)
    }
    fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
        (**self).gradient(p)
    }
    fn hessian_bound(&self, j: usize, k: usize, bx: &CoordBox) -> Result<f64> {
        (**self).hessian_bound(j, k, bx)
    }
    fn constant_hessian(&self) -> bool {
        (**self).constant_hessian()
    }
    fn strong_convexity(&self) -> Option<f64> {
        (**self).strong_convexity()
    }
    fn grad_extreme_points(&self, j: usize, bx: &CoordBox) -> Option<Result<(Point, Point)>> {
        (**self).grad_extreme_points(j, bx)
    }
    fn grad_extremes(&self, j: usize, bx: &CoordBox) -> Option<Result<(f64, f64)>> {
        (**self).grad_extremes(j, bx)
    }
    fn min_value(&self) -> Option<f64> {
        (**self).min_value()
    }
    fn optimality_gap(&self, p: &Point) -> Option<Result<f64>> {
        (**self).optimality_gap(p)
    }
}

/// Wraps an objective with an externally computed minimum value.
#[derive(Debug, Clone, Copy)]
pub struct Anchored<O> {
    pub inner: O,
    pub min: f64,
}

impl<O: Objective> Objective for Anchored<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn name(&self) -> String {
        self.inner.name()
    }
    fn check_domain(&self, p: &Point) -> Result<()> {
        self.inner.check_domain(p)
    }
    fn value(&self, p: &Point) -> Result<f64> {
        self.inner.value(p)
    }
    fn grad_coord(&self, p: &Point, j: usize) -> Result<f64> {
        self.inner.grad_coord(p, j)
    }
    fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
        self.inner.gradient(p)
    }
    fn hessian_bound(&self, j: usize, k: usize, bx: &CoordBox) -> Result<f64> {
        self.inner.hessian_bound(j, k, bx)
    }
    fn constant_hessian(&self) -> bool {
        self.inner.constant_hessian()
    }
    fn strong_convexity(&self) -> Option<f64> {
        self.inner.strong_convexity()
    }
    fn grad_extreme_points(&self, j: usize, bx: &CoordBox) -> Option<Result<(Point, Point)>> {
        self.inner.grad_extreme_points(j, bx)
    }
    fn min_value(&self) -> Option<f64> {
        Some(self.min)
    }
}

/// Result of comparing an analytic partial derivative with a central difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub analytic: f64,
    pub central_difference: f64,
    pub rel_err: f64,
}

/// Compares `∇_j φ(p)` with `(φ(p + h e_j) − φ(p − h e_j)) / 2h`.
pub fn fd_gradient_check(obj: &dyn Objective, p: &Point, j: usize, h: f64) -> Result<GradientCheck> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let analytic = obj.grad_coord(p, j)?;
    let plus = obj.value(&p.with_coord(j, p[j] + h))?;
    let minus = obj.value(&p.with_coord(j, p[j] - h))?;
    let central_difference = (plus - minus) / (2.0 * h);
    let rel_err = (analytic - central_difference).abs() / analytic.abs().max(1.0);
    Ok(GradientCheck { analytic, central_difference, rel_err })
}

/// Extremes of the affine map `base + Σ_k coef[k]·x_k` over the box, skipping the pinned coordinate.
///
/// The pinned coordinate's contribution must already be folded into `base`.
pub fn affine_extremes(base: f64, coef: impl Fn(usize) -> f64, bx: &CoordBox) -> (f64, f64) {
    let (mut lo, mut hi) = (base, base);
    for k in 0..bx.dim() {
        if k == bx.pinned() {
            continue;
        }
        let c = coef(k);
        let (a, b) = (c * bx.lo()[k], c * bx.hi()[k]);
        lo += a.min(b);
        hi += a.max(b);
    }
    (lo, hi)
}

/// Corners of the box minimizing and maximizing an affine map with the given coefficients.
pub fn affine_extreme_points(coef: impl Fn(usize) -> f64, bx: &CoordBox) -> (Point, Point) {
    let mut lo = bx.lower_corner();
    let mut hi = bx.upper_corner();
    for k in 0..bx.dim() {
        if k != bx.pinned() && coef(k) < 0.0 {
            std::mem::swap(&mut lo[k], &mut hi[k]);
        }
    }
    (lo, hi)
}
