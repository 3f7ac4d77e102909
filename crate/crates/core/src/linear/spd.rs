use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::monitor::{ControlParams, XiPolicy};
use crate::objective::{affine_extreme_points, CoordBox, Objective, Point};

/// Margin above the strict step-size bound.
pub const GAMMA_MARGIN: f64 = 1e-3;

/// `½pᵀAp − bᵀp` for symmetric positive definite `A`; minimized where `Ap = b`.
#[derive(Debug, Clone)]
pub struct SpdProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    solution: DVector<f64>,
    min_value: f64,
    min_eigenvalue: f64,
}

impl SpdProblem {
    /// Rejects non-square, non-symmetric or indefinite matrices.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::InvalidInput(format!("matrix is {}x{}, expected square", n, a.ncols())));
        }
        if b.len() != n {
            return Err(Error::Dimension { expected: n, got: b.len() });
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        check_symmetric(&a)?;
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("matrix is not positive definite".into()))?;
        let solution = chol.solve(&b);
        let min_value = -0.5 * b.dot(&solution);
        let min_eigenvalue = a.clone().symmetric_eigenvalues().min();
        Ok(SpdProblem { a, b, solution, min_value, min_eigenvalue })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows have unequal lengths".into()));
        }
        let a = DMatrix::from_fn(n, n, |i, k| rows[i][k]);
        SpdProblem::new(a, DVector::from_column_slice(b))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn solution(&self) -> Point {
        Point::new(self.solution.iter().copied().collect()).expect("finite solution")
    }

    /// `Ap − b`.
    pub fn residual_vector(&self, p: &[f64]) -> Vec<f64> {
        let pv = DVector::from_column_slice(p);
        (&self.a * pv - &self.b).iter().copied().collect()
    }

    /// `‖Ap − b‖∞`.
    pub fn residual_inf(&self, p: &Point) -> f64 {
        self.residual_vector(p).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Step parameters from [`spd_gamma_bound`], raised where needed so one set of
    /// constants certifies every coordinate (see [`uniform_gammas`]).
    pub fn safe_gammas(&self, alpha: f64) -> Result<Vec<f64>> {
        let g: Vec<f64> = (0..self.a.nrows()).map(|j| spd_gamma_bound(&self.a, j, alpha)).collect::<Result<_>>()?;
        Ok(uniform_gammas(&self.a, &vec![0.0; g.len()], g))
    }

    /// Constants the monitor should use for these step parameters, with unit weights.
    pub fn control_params(&self, gammas: &[f64]) -> Result<ControlParams> {
        derived_params(&self.a, &vec![0.0; gammas.len()], gammas)
    }
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    for i in 0..n {
        for k in (i + 1)..n {
            if a[(i, k)] != a[(k, i)] {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i},{k}): {} vs {}",
                    a[(i, k)],
                    a[(k, i)]
                )));
            }
        }
    }
    Ok(())
}

fn off_diagonal_sum(a: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.nrows()).filter(|&k| k != j).map(|k| a[(k, j)].abs()).sum()
}

/// Smallest safe `γ_j` for `f(p) = ½pᵀAp − bᵀp`, inflated by [`GAMMA_MARGIN`].
pub fn spd_gamma_bound(a: &DMatrix<f64>, j: usize, alpha: f64) -> Result<f64> {
    if !(alpha >= 2.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be at least 2")));
    }
    if j >= a.nrows() {
        return Err(Error::InvalidInput(format!("coordinate {j} out of range")));
    }
    check_symmetric(a)?;
    Ok(gamma_from(a[(j, j)], off_diagonal_sum(a, j), alpha))
}

pub(crate) fn gamma_from(diag: f64, off: f64, alpha: f64) -> f64 {
    (1.0 + GAMMA_MARGIN) * ((diag + 8.0 * off) / 2.0).max(diag).max(alpha * diag / 2.0)
}

/// Per-coordinate bounds each satisfy `(G_jj + L_j)/(2γ_j) + 4S_j/γ_j < 1`, but the
/// worst curvature ratio and the worst coupling ratio can sit on different coordinates.
/// Keeps `α = min_j 2γ_j/(G_jj + L_j)` and raises any `γ_j` with `4S_j/γ_j ≥ (1 − 1/α)/(1 + margin)`.
pub(crate) fn uniform_gammas(g: &DMatrix<f64>, l: &[f64], mut gammas: Vec<f64>) -> Vec<f64> {
    let n = g.nrows();
    let alpha = (0..n)
        .filter(|&j| g[(j, j)] + l[j] > 0.0)
        .map(|j| 2.0 * gammas[j] / (g[(j, j)] + l[j]))
        .fold(f64::INFINITY, f64::min);
    if !alpha.is_finite() {
        return gammas;
    }
    let room = (1.0 - 1.0 / alpha) / (1.0 + GAMMA_MARGIN);
    for (j, gamma) in gammas.iter_mut().enumerate() {
        let need = 4.0 * off_diagonal_sum(g, j) / room;
        if *gamma < need {
            *gamma = need;
        }
    }
    gammas
}

/// `α = min_j 2γ_j/(G_jj + L_j)` and `ε_F = ε_B = max_j Σ_{k≠j}|G_jk| / γ_j`, validated.
pub(crate) fn derived_params(g: &DMatrix<f64>, l: &[f64], gammas: &[f64]) -> Result<ControlParams> {
    let n = g.nrows();
    if gammas.len() != n {
        return Err(Error::Dimension { expected: n, got: gammas.len() });
    }
    let mut alpha = f64::INFINITY;
    let mut eps = 0.0f64;
    for j in 0..n {
        let curv = g[(j, j)] + l[j];
        if curv > 0.0 {
            alpha = alpha.min(2.0 * gammas[j] / curv);
        }
        eps = eps.max(off_diagonal_sum(g, j) / gammas[j]);
    }
    // uncoupled or flat coordinates leave the constants unconstrained; keep them finite
    let alpha = if alpha.is_finite() { alpha } else { 1e9 };
    let eps = eps.max(1e-12);
    ControlParams::new(alpha, eps, eps, XiPolicy::Unit)
}

impl Objective for SpdProblem {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn name(&self) -> String {
        format!("spd(n={})", self.dim())
    }

    fn value(&self, p: &Point) -> Result<f64> {
        self.check_domain(p)?;
        let pv = DVector::from_column_slice(p);
        Ok(0.5 * pv.dot(&(&self.a * &pv)) - self.b.dot(&pv))
    }

    fn grad_coord(&self, p: &Point, j: usize) -> Result<f64> {
        let col = self.a.column(j);
        Ok(col.iter().zip(p.iter()).map(|(a, x)| a * x).sum::<f64>() - self.b[j])
    }

    fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
        let pv = DVector::from_column_slice(p);
        Ok((&self.a * pv - &self.b).iter().copied().collect())
    }

    fn hessian_bound(&self, j: usize, k: usize, _bx: &CoordBox) -> Result<f64> {
        Ok(self.a[(j, k)].abs())
    }

    fn constant_hessian(&self) -> bool {
        true
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.min_eigenvalue)
    }

    fn grad_extreme_points(&self, j: usize, bx: &CoordBox) -> Option<Result<(Point, Point)>> {
        Some(Ok(affine_extreme_points(|k| self.a[(j, k)], bx)))
    }

    fn min_value(&self) -> Option<f64> {
        Some(self.min_value)
    }

    fn optimality_gap(&self, p: &Point) -> Option<Result<f64>> {
        let d = DVector::from_column_slice(p) - &self.solution;
        Some(Ok(0.5 * d.dot(&(&self.a * &d))))
    }
}
