use nalgebra::DMatrix;

use super::composite::CompositeProblem;
use crate::engine::{Step, UpdateRule};
use crate::error::{Error, Result};
use crate::objective::{Objective, Point};

/// Updates between exact recomputations of the cache.
pub const REANCHOR_EVERY: usize = 10_000;

/// Cached `(A_j)ᵀ(Ap − b)` and `f_j'(p_j)` kept current by rank-one corrections.
#[derive(Debug, Clone)]
pub struct GramCache {
    gram: DMatrix<f64>,
    cross: Vec<f64>,
    fprime: Vec<f64>,
    p: Vec<f64>,
    since_anchor: usize,
}

impl GramCache {
    pub fn new(problem: &CompositeProblem, p: &Point) -> Result<Self> {
        if p.dim() != problem.dim() {
            return Err(Error::Dimension { expected: problem.dim(), got: p.dim() });
        }
        let mut c = GramCache {
            gram: problem.gram().clone(),
            cross: Vec::new(),
            fprime: Vec::new(),
            p: p.to_vec(),
            since_anchor: 0,
        };
        c.reanchor(problem);
        Ok(c)
    }

    /// Recomputes every cached entry from scratch.
    pub fn reanchor(&mut self, problem: &CompositeProblem) {
        let p = Point::new(self.p.clone()).expect("finite cache point");
        let cross = problem.matrix().transpose() * problem.residual(&p);
        self.cross = cross.iter().copied().collect();
        self.fprime = problem.terms().iter().zip(&self.p).map(|(t, &x)| t.derivative(x)).collect();
        self.since_anchor = 0;
    }

    /// Applies `p_k += delta`: every cross term shifts by `delta·(A_j)ᵀA_k`, and only `f_k'` is recomputed.
    pub fn incremental_grad_update(&mut self, problem: &CompositeProblem, k: usize, delta: f64) {
        if self.since_anchor >= REANCHOR_EVERY {
            self.reanchor(problem);
        }
        if delta != 0.0 {
            for (j, c) in self.cross.iter_mut().enumerate() {
                *c += delta * self.gram[(j, k)];
            }
            self.p[k] += delta;
            self.fprime[k] = problem.terms()[k].derivative(self.p[k]);
        }
        self.since_anchor += 1;
    }

    pub fn point(&self) -> &[f64] {
        &self.p
    }

    /// Cached `∇_j F` at the cache point.
    pub fn gradient(&self, j: usize) -> f64 {
        self.cross[j] + self.fprime[j]
    }

    pub fn gradients(&self) -> Vec<f64> {
        (0..self.cross.len()).map(|j| self.gradient(j)).collect()
    }

    /// `∇_j F` at a view that agrees with the cache point in coordinate `j`.
    pub fn gradient_at_view(&self, j: usize, view: &[f64]) -> f64 {
        let shift: f64 = (0..self.p.len())
            .filter(|&k| view[k] != self.p[k])
            .map(|k| self.gram[(j, k)] * (view[k] - self.p[k]))
            .sum();
        self.cross[j] + shift + self.fprime[j]
    }
}

/// Constant step parameters with gradient reads served from a [`GramCache`].
#[derive(Debug, Clone)]
pub struct CachedSteps<'a> {
    problem: &'a CompositeProblem,
    gamma: Vec<f64>,
    alpha: f64,
    cache: Option<GramCache>,
}

impl<'a> CachedSteps<'a> {
    pub fn new(problem: &'a CompositeProblem, gamma: Vec<f64>, alpha: f64) -> Result<Self> {
        if gamma.len() != problem.dim() {
            return Err(Error::Dimension { expected: problem.dim(), got: gamma.len() });
        }
        if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidInput("step parameters must be positive".into()));
        }
        Ok(CachedSteps { problem, gamma, alpha, cache: None })
    }

    pub fn cache(&self) -> Option<&GramCache> {
        self.cache.as_ref()
    }
}

impl UpdateRule for CachedSteps<'_> {
    fn name(&self) -> String {
        "cached".into()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn init(&mut self, _obj: &dyn Objective, p0: &Point) -> Result<()> {
        self.cache = Some(GramCache::new(self.problem, p0)?);
        Ok(())
    }
    fn stale_gradient(&mut self, _obj: &dyn Objective, j: usize, view: &Point, _current: &Point) -> Result<f64> {
        let cache = self.cache.as_ref().ok_or_else(|| Error::InvalidInput("cache not initialised".into()))?;
        Ok(cache.gradient_at_view(j, view))
    }
    fn step(&mut self, j: usize, _t: f64, _current: &Point, g_tilde: f64) -> Result<Step> {
        Ok(Step { drive: g_tilde, gamma: self.gamma[j] })
    }
    fn after_update(&mut self, _obj: &dyn Objective, _p: &Point, j: usize, delta: f64) -> Result<()> {
        if let Some(c) = self.cache.as_mut() {
            c.incremental_grad_update(self.problem, j, delta);
        }
        Ok(())
    }
}
