use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spd::{derived_params, gamma_from, uniform_gammas};
use crate::error::{Error, Result};
use crate::monitor::ControlParams;
use crate::objective::{affine_extreme_points, CoordBox, Objective, Point};

/// Separable convex term applied to one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Univariate {
    Zero,
    /// `weight/2 · (x − center)²`.
    Quadratic { center: f64, weight: f64 },
    /// `δ²(√(1 + ((x − center)/δ)²) − 1)`.
    PseudoHuber { center: f64, delta: f64 },
}

impl Univariate {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Univariate::Zero => 0.0,
            Univariate::Quadratic { center, weight } => 0.5 * weight * (x - center).powi(2),
            Univariate::PseudoHuber { center, delta } => {
                let r = (x - center) / delta;
                delta * delta * ((1.0 + r * r).sqrt() - 1.0)
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Univariate::Zero => 0.0,
            Univariate::Quadratic { center, weight } => weight * (x - center),
            Univariate::PseudoHuber { center, delta } => {
                let r = (x - center) / delta;
                (x - center) / (1.0 + r * r).sqrt()
            }
        }
    }

    /// Upper bound on the second derivative.
    pub fn curvature_bound(&self) -> f64 {
        match *self {
            Univariate::Zero => 0.0,
            Univariate::Quadratic { weight, .. } => weight,
            Univariate::PseudoHuber { .. } => 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Univariate::Quadratic { weight, center } if !(weight >= 0.0 && weight.is_finite() && center.is_finite()) => {
                Err(Error::InvalidInput(format!("quadratic weight {weight} must be nonnegative")))
            }
            Univariate::PseudoHuber { delta, center } if !(delta > 0.0 && delta.is_finite() && center.is_finite()) => {
                Err(Error::InvalidInput(format!("pseudo-Huber delta {delta} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// `Σ_j f_j(p_j) + ½‖Ap − b‖²` with `A` of shape `r × n`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    terms: Vec<Univariate>,
    gram: DMatrix<f64>,
    min: Option<(DVector<f64>, f64)>,
}

impl CompositeProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, terms: Vec<Univariate>) -> Result<Self> {
        let n = a.ncols();
        if n == 0 {
            return Err(Error::InvalidInput("problem needs at least one column".into()));
        }
        if b.len() != a.nrows() {
            return Err(Error::Dimension { expected: a.nrows(), got: b.len() });
        }
        if terms.len() != n {
            return Err(Error::Dimension { expected: n, got: terms.len() });
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        for t in &terms {
            t.validate()?;
        }
        let gram = a.transpose() * &a;
        let min = quadratic_minimum(&a, &b, &gram, &terms);
        Ok(CompositeProblem { a, b, terms, gram, min })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn terms(&self) -> &[Univariate] {
        &self.terms
    }

    pub fn curvature_bounds(&self) -> Vec<f64> {
        self.terms.iter().map(Univariate::curvature_bound).collect()
    }

    /// `Ap − b`.
    pub fn residual(&self, p: &Point) -> DVector<f64> {
        &self.a * DVector::from_column_slice(p) - &self.b
    }

    /// The minimizer, when every separable term is quadratic.
    pub fn solution(&self) -> Option<Point> {
        self.min.as_ref().map(|(x, _)| Point::new(x.iter().copied().collect()).expect("finite"))
    }

    pub fn safe_gammas(&self, alpha: f64) -> Result<Vec<f64>> {
        let l = self.curvature_bounds();
        let g = (0..self.dim()).map(|j| composite_gamma_bound(&self.gram, &l, j, alpha)).collect::<Result<_>>()?;
        Ok(uniform_gammas(&self.gram, &l, g))
    }

    pub fn control_params(&self, gammas: &[f64]) -> Result<ControlParams> {
        derived_params(&self.gram, &self.curvature_bounds(), gammas)
    }
}

fn quadratic_minimum(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    gram: &DMatrix<f64>,
    terms: &[Univariate],
) -> Option<(DVector<f64>, f64)> {
    let mut h = gram.clone();
    let mut rhs = a.transpose() * b;
    for (j, t) in terms.iter().enumerate() {
        match *t {
            Univariate::Zero => {}
            Univariate::Quadratic { center, weight } => {
                h[(j, j)] += weight;
                rhs[j] += weight * center;
            }
            Univariate::PseudoHuber { .. } => return None,
        }
    }
    let x = h.cholesky()?.solve(&rhs);
    let value = terms.iter().zip(x.iter()).map(|(t, &xi)| t.value(xi)).sum::<f64>()
        + 0.5 * (a * &x - b).norm_squared();
    Some((x, value))
}

/// Smallest safe `γ_j` for the composite objective, inflated by the same margin as the SPD bound.
pub fn composite_gamma_bound(gram: &DMatrix<f64>, l: &[f64], j: usize, alpha: f64) -> Result<f64> {
    if !(alpha >= 2.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be at least 2")));
    }
    if j >= gram.nrows() || l.len() != gram.nrows() {
        return Err(Error::InvalidInput("coordinate or curvature bounds out of range".into()));
    }
    if l[j] < 0.0 {
        return Err(Error::InvalidInput(format!("curvature bound {} is negative", l[j])));
    }
    let off: f64 = (0..gram.nrows()).filter(|&k| k != j).map(|k| gram[(k, j)].abs()).sum();
    Ok(gamma_from(gram[(j, j)] + l[j], off, alpha))
}

impl Objective for CompositeProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn name(&self) -> String {
        format!("composite(r={},n={})", self.a.nrows(), self.dim())
    }

    fn value(&self, p: &Point) -> Result<f64> {
        self.check_domain(p)?;
        let sep: f64 = self.terms.iter().zip(p.iter()).map(|(t, &x)| t.value(x)).sum();
        Ok(sep + 0.5 * self.residual(p).norm_squared())
    }

    fn grad_coord(&self, p: &Point, j: usize) -> Result<f64> {
        let r = self.residual(p);
        Ok(self.a.column(j).dot(&r) + self.terms[j].derivative(p[j]))
    }

    fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
        let g = self.a.transpose() * self.residual(p);
        Ok((0..self.dim()).map(|j| g[j] + self.terms[j].derivative(p[j])).collect())
    }

    fn hessian_bound(&self, j: usize, k: usize, _bx: &CoordBox) -> Result<f64> {
        let extra = if j == k { self.terms[j].curvature_bound() } else { 0.0 };
        Ok(self.gram[(j, k)].abs() + extra)
    }

    fn constant_hessian(&self) -> bool {
        true
    }

    fn grad_extreme_points(&self, j: usize, bx: &CoordBox) -> Option<Result<(Point, Point)>> {
        // the pinned coordinate is fixed, so the separable part is constant over the box
        Some(Ok(affine_extreme_points(|k| self.gram[(j, k)], bx)))
    }

    fn min_value(&self) -> Option<f64> {
        self.min.as_ref().map(|(_, v)| *v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::fd_gradient_check;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        let id = DMatrix::identity(2, 2);
        assert_relative_eq!(composite_gamma_bound(&id, &[0.0, 0.0], 0, 2.0).unwrap(), 1.001);
        assert_relative_eq!(composite_gamma_bound(&id, &[1.0, 1.0], 0, 2.0).unwrap(), 2.0 * 1.001);
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(composite_gamma_bound(&g, &[0.0, 0.0], 1, 2.0).unwrap(), 5.005);
    }

    #[test]
    fn closed_form_minima() {
        let half = Univariate::Quadratic { center: 0.0, weight: 1.0 };
        let p = CompositeProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![2.0, 2.0]), vec![half; 2]).unwrap();
        let s = p.solution().unwrap();
        assert_relative_eq!(s[0], 1.0, max_relative = 1e-14);
        let shifted = Univariate::Quadratic { center: 1.0, weight: 1.0 };
        let q = CompositeProblem::new(DMatrix::zeros(0, 3), DVector::zeros(0), vec![shifted; 3]).unwrap();
        assert_eq!(q.solution().unwrap().to_vec(), vec![1.0; 3]);
        let huber = Univariate::PseudoHuber { center: 0.0, delta: 1.0 };
        let h = CompositeProblem::new(DMatrix::identity(2, 2), DVector::zeros(2), vec![huber; 2]).unwrap();
        assert!(h.solution().is_none());
    }

    proptest! {
        #[test]
        fn gradients_match_differences(
            entries in prop::collection::vec(-1.0f64..1.0, 12),
            x in prop::collection::vec(-3.0f64..3.0, 4),
            j in 0usize..4,
        ) {
            let a = DMatrix::from_row_slice(3, 4, &entries);
            let terms = vec![
                Univariate::Zero,
                Univariate::Quadratic { center: 0.5, weight: 2.0 },
                Univariate::PseudoHuber { center: -1.0, delta: 0.7 },
                Univariate::PseudoHuber { center: 2.0, delta: 3.0 },
            ];
            let prob = CompositeProblem::new(a, DVector::from_vec(vec![1.0, -1.0, 0.3]), terms).unwrap();
            let c = fd_gradient_check(&prob, &Point::new(x).unwrap(), j, 1e-5).unwrap();
            prop_assert!(c.rel_err < 1e-5, "{:?}", c);
        }
    }
}
