use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{CoordBox, Objective, Point};

/// Buyer with complementary-CES utility `(Σ_j a_j x_j^ρ)^{1/ρ}`, `ρ < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CesBuyer {
    pub e: f64,
    pub rho: f64,
    pub a: Vec<f64>,
}

impl CesBuyer {
    /// `θ = ρ/(ρ − 1)`, in `(0, 1)` for complements.
    pub fn theta(&self) -> f64 {
        self.rho / (self.rho - 1.0)
    }

    fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        let s = 1.0 / (1.0 - self.rho);
        self.a.iter().map(move |&a| if a > 0.0 { a.powf(s) } else { 0.0 })
    }

    fn denominator(&self, p: &[f64]) -> f64 {
        let th = self.theta();
        self.weights().zip(p).map(|(w, &pk)| if w > 0.0 { w * pk.powf(th) } else { 0.0 }).sum()
    }

    pub fn demand(&self, p: &[f64]) -> Vec<f64> {
        let th = self.theta();
        let d = self.denominator(p);
        self.weights()
            .zip(p)
            .map(|(w, &pk)| if w > 0.0 { self.e * w * pk.powf(th - 1.0) / d } else { 0.0 })
            .collect()
    }

    pub fn indirect_utility(&self, p: &[f64]) -> f64 {
        self.e * self.denominator(p).powf(-1.0 / self.theta())
    }
}

/// Buyer with Leontief utility `min_{j∈S} b_j x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeontiefBuyer {
    pub e: f64,
    /// Zero-based goods the buyer wants.
    #[serde(rename = "S")]
    pub goods: Vec<usize>,
    /// One positive coefficient per entry of `goods`.
    pub b: Vec<f64>,
}

impl LeontiefBuyer {
    fn cost_per_util(&self, p: &[f64]) -> f64 {
        self.goods.iter().zip(&self.b).map(|(&k, &b)| p[k] / b).sum()
    }

    pub fn demand(&self, p: &[f64]) -> Vec<f64> {
        let u = self.indirect_utility(p);
        let mut x = vec![0.0; p.len()];
        for (&k, &b) in self.goods.iter().zip(&self.b) {
            x[k] = u / b;
        }
        x
    }

    pub fn indirect_utility(&self, p: &[f64]) -> f64 {
        self.e / self.cost_per_util(p)
    }
}

/// A Fisher market with unit supply of every good.
///
/// Every buyer's indirect utility is homogeneous of degree one in money, so
/// `φ(p) = Σ_j p_j + Σ_i e_i ln û_i(p)` has `∇φ = −z`.
pub trait FisherMarket: Send + Sync {
    fn goods(&self) -> usize;
    fn buyers(&self) -> usize;
    fn budget(&self, i: usize) -> f64;
    fn buyer_demand(&self, i: usize, p: &[f64]) -> Vec<f64>;
    fn buyer_utility(&self, i: usize, p: &[f64]) -> f64;
    /// `θ_i`: the cross-price Hessian of `φ` is `Σ_i θ_i x_ij x_ik / e_i`.
    fn complementarity(&self, i: usize) -> f64;
    fn kind(&self) -> &'static str;

    fn total_budget(&self) -> f64 {
        (0..self.buyers()).map(|i| self.budget(i)).sum()
    }
}

fn check_prices(n: usize, p: &[f64]) -> Result<()> {
    if p.len() != n {
        return Err(Error::Dimension { expected: n, got: p.len() });
    }
    if let Some((j, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("price of good {j} is {v}; prices must be positive")));
    }
    Ok(())
}

/// Buyer `i`'s demanded bundle.
pub fn demand(m: &dyn FisherMarket, i: usize, p: &[f64]) -> Result<Vec<f64>> {
    check_prices(m.goods(), p)?;
    if i >= m.buyers() {
        return Err(Error::InvalidInput(format!("buyer {i} out of range")));
    }
    Ok(m.buyer_demand(i, p))
}

/// Aggregate demand `x_j = Σ_i x_ij`.
pub fn aggregate_demand(m: &dyn FisherMarket, p: &[f64]) -> Result<Vec<f64>> {
    check_prices(m.goods(), p)?;
    let mut x = vec![0.0; m.goods()];
    for i in 0..m.buyers() {
        for (xj, d) in x.iter_mut().zip(m.buyer_demand(i, p)) {
            *xj += d;
        }
    }
    Ok(x)
}

/// `z_j = x_j − 1`.
pub fn excess_demand(m: &dyn FisherMarket, p: &[f64]) -> Result<Vec<f64>> {
    Ok(aggregate_demand(m, p)?.into_iter().map(|x| x - 1.0).collect())
}

pub fn market_potential(m: &dyn FisherMarket, p: &[f64]) -> Result<f64> {
    check_prices(m.goods(), p)?;
    let util: f64 = (0..m.buyers()).map(|i| m.budget(i) * m.buyer_utility(i, p).ln()).sum();
    Ok(p.iter().sum::<f64>() + util)
}

/// `∂²φ/∂p_j∂p_k` at `p`.
pub fn potential_hessian(m: &dyn FisherMarket, j: usize, k: usize, p: &[f64]) -> Result<f64> {
    check_prices(m.goods(), p)?;
    let mut h = 0.0;
    for i in 0..m.buyers() {
        let x = m.buyer_demand(i, p);
        let th = m.complementarity(i);
        h += th * x[j] * x[k] / m.budget(i);
        if j == k {
            h += (1.0 - th) * x[j] / p[j];
        }
    }
    Ok(h)
}

/// Bound over a box from the Hessian at a reference point, inflated by `(1/r₁)²` with
/// `r₁ = min_k lo_k / ref_k`.
pub fn ces_hessian_bound(m: &dyn FisherMarket, j: usize, k: usize, bx: &CoordBox, reference: &[f64]) -> Result<f64> {
    check_prices(m.goods(), reference)?;
    if bx.lo().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("box touches nonpositive prices".into()));
    }
    let r1 = bx.lo().iter().zip(reference).map(|(l, r)| l / r).fold(1.0f64, f64::min);
    Ok(potential_hessian(m, j, k, reference)? / (r1 * r1))
}

fn validate_common(goods: usize, budgets: impl Iterator<Item = f64>) -> Result<()> {
    if goods == 0 {
        return Err(Error::InvalidInput("market needs at least one good".into()));
    }
    for (i, e) in budgets.enumerate() {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidInput(format!("buyer {i} budget {e} must be positive")));
        }
    }
    Ok(())
}

fn check_all_desired(desired: &[bool]) -> Result<()> {
    match desired.iter().position(|d| !d) {
        Some(j) => Err(Error::InvalidInput(format!("good {j} is desired by no buyer"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesMarket {
    goods: usize,
    buyers: Vec<CesBuyer>,
}

impl CesMarket {
    pub fn new(goods: usize, buyers: Vec<CesBuyer>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::InvalidInput("market needs at least one buyer".into()));
        }
        validate_common(goods, buyers.iter().map(|b| b.e))?;
        let mut desired = vec![false; goods];
        for (i, b) in buyers.iter().enumerate() {
            if !(b.rho < 0.0 && b.rho.is_finite()) {
                return Err(Error::InvalidInput(format!("buyer {i}: rho = {} must be negative", b.rho)));
            }
            if b.a.len() != goods {
                return Err(Error::Dimension { expected: goods, got: b.a.len() });
            }
            if b.a.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(Error::InvalidInput(format!("buyer {i}: coefficients must be nonnegative")));
            }
            if !b.a.iter().any(|&a| a > 0.0) {
                return Err(Error::InvalidInput(format!("buyer {i} desires no good")));
            }
            for (d, &a) in desired.iter_mut().zip(&b.a) {
                *d |= a > 0.0;
            }
        }
        check_all_desired(&desired)?;
        Ok(CesMarket { goods, buyers })
    }

    pub fn buyer_list(&self) -> &[CesBuyer] {
        &self.buyers
    }
}

impl FisherMarket for CesMarket {
    fn goods(&self) -> usize {
        self.goods
    }
    fn buyers(&self) -> usize {
        self.buyers.len()
    }
    fn budget(&self, i: usize) -> f64 {
        self.buyers[i].e
    }
    fn buyer_demand(&self, i: usize, p: &[f64]) -> Vec<f64> {
        self.buyers[i].demand(p)
    }
    fn buyer_utility(&self, i: usize, p: &[f64]) -> f64 {
        self.buyers[i].indirect_utility(p)
    }
    fn complementarity(&self, i: usize) -> f64 {
        self.buyers[i].theta()
    }
    fn kind(&self) -> &'static str {
        "ces"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeontiefMarket {
    goods: usize,
    buyers: Vec<LeontiefBuyer>,
}

impl LeontiefMarket {
    pub fn new(goods: usize, buyers: Vec<LeontiefBuyer>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::InvalidInput("market needs at least one buyer".into()));
        }
        validate_common(goods, buyers.iter().map(|b| b.e))?;
        let mut desired = vec![false; goods];
        for (i, b) in buyers.iter().enumerate() {
            if b.goods.is_empty() {
                return Err(Error::InvalidInput(format!("buyer {i} has an empty goods set")));
            }
            if b.b.len() != b.goods.len() {
                return Err(Error::Dimension { expected: b.goods.len(), got: b.b.len() });
            }
            let mut seen = vec![false; goods];
            for (&k, &c) in b.goods.iter().zip(&b.b) {
                if k >= goods || seen[k] {
                    return Err(Error::InvalidInput(format!("buyer {i}: good {k} out of range or repeated")));
                }
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidInput(format!("buyer {i}: coefficient {c} must be positive")));
                }
                seen[k] = true;
                desired[k] = true;
            }
        }
        check_all_desired(&desired)?;
        Ok(LeontiefMarket { goods, buyers })
    }

    pub fn buyer_list(&self) -> &[LeontiefBuyer] {
        &self.buyers
    }
}

impl FisherMarket for LeontiefMarket {
    fn goods(&self) -> usize {
        self.goods
    }
    fn buyers(&self) -> usize {
        self.buyers.len()
    }
    fn budget(&self, i: usize) -> f64 {
        self.buyers[i].e
    }
    fn buyer_demand(&self, i: usize, p: &[f64]) -> Vec<f64> {
        self.buyers[i].demand(p)
    }
    fn buyer_utility(&self, i: usize, p: &[f64]) -> f64 {
        self.buyers[i].indirect_utility(p)
    }
    fn complementarity(&self, _i: usize) -> f64 {
        1.0
    }
    fn kind(&self) -> &'static str {
        "leontief"
    }
}

/// Either supported market family.
#[derive(Debug, Clone, PartialEq)]
pub enum Market {
    Ces(CesMarket),
    Leontief(LeontiefMarket),
}

impl Market {
    fn inner(&self) -> &dyn FisherMarket {
        match self {
            Market::Ces(m) => m,
            Market::Leontief(m) => m,
        }
    }
}

impl FisherMarket for Market {
    fn goods(&self) -> usize {
        self.inner().goods()
    }
    fn buyers(&self) -> usize {
        self.inner().buyers()
    }
    fn budget(&self, i: usize) -> f64 {
        self.inner().budget(i)
    }
    fn buyer_demand(&self, i: usize, p: &[f64]) -> Vec<f64> {
        self.inner().buyer_demand(i, p)
    }
    fn buyer_utility(&self, i: usize, p: &[f64]) -> f64 {
        self.inner().buyer_utility(i, p)
    }
    fn complementarity(&self, i: usize) -> f64 {
        self.inner().complementarity(i)
    }
    fn kind(&self) -> &'static str {
        self.inner().kind()
    }
}

// Demand falls in every price, so −z_j is increasing in each price and every
// Hessian term is largest at the low corner of a box.
macro_rules! market_objective {
    ($t:ty) => {
        impl Objective for $t {
            fn dim(&self) -> usize {
                self.goods()
            }
            fn name(&self) -> String {
                format!("{}(goods={},buyers={})", self.kind(), self.goods(), self.buyers())
            }
            fn check_domain(&self, p: &Point) -> Result<()> {
                check_prices(self.goods(), p)
            }
            fn value(&self, p: &Point) -> Result<f64> {
                market_potential(self, p)
            }
            fn grad_coord(&self, p: &Point, j: usize) -> Result<f64> {
                check_prices(self.goods(), p)?;
                let x: f64 = (0..self.buyers()).map(|i| self.buyer_demand(i, p)[j]).sum();
                Ok(1.0 - x)
            }
            fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
                Ok(excess_demand(self, p)?.into_iter().map(|z| -z).collect())
            }
            fn hessian_bound(&self, j: usize, k: usize, bx: &CoordBox) -> Result<f64> {
                potential_hessian(self, j, k, &bx.lower_corner())
            }
            fn grad_extreme_points(&self, _j: usize, bx: &CoordBox) -> Option<Result<(Point, Point)>> {
                Some(Ok((bx.lower_corner(), bx.upper_corner())))
            }
        }
    };
}

market_objective!(CesMarket);
market_objective!(LeontiefMarket);
market_objective!(Market);
