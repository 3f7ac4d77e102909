//! Shipped problems used by the examples, the CLI demos and the acceptance suite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::RunConfig;
use crate::linear::{CompositeProblem, SpdProblem, Univariate};
use crate::markets::{CesBuyer, CesMarket, LeontiefBuyer, LeontiefMarket, OngoingConfig};
use crate::objective::Point;
use crate::schedule::SchedulePolicy;
use crate::staleness::StalenessPolicy;

/// Minimum gap for the shipped random-gap schedules.
pub const RANDOM_GAP_MIN: f64 = 0.25;

pub fn random_gap() -> SchedulePolicy {
    SchedulePolicy::RandomGap { g_min: RANDOM_GAP_MIN }
}

/// `[[2,1],[1,2]]`, `b = (3,3)`; the solution is `(1,1)`.
pub fn spd_coupled() -> SpdProblem {
    SpdProblem::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[3.0, 3.0]).expect("valid preset")
}

pub fn spd_identity() -> SpdProblem {
    SpdProblem::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).expect("valid preset")
}

/// Symmetric, strictly diagonally dominant: off-diagonal row mass is about half the diagonal.
pub fn spd_diagonally_dominant(n: usize, seed: u64) -> SpdProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.2) {
                let v = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&k| k != i).map(|k| f64::abs(a[(i, k)])).sum();
        a[(i, i)] = 2.0 * off + rng.gen_range(1.0..2.0);
    }
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    SpdProblem::new(a, b).expect("diagonally dominant matrices are positive definite")
}

/// The shipped SPD suite: identity, coupled 2×2, a 10×10 and a 50×50 dominant matrix.
pub fn spd_suite() -> Vec<(&'static str, SpdProblem)> {
    vec![
        ("identity2", spd_identity()),
        ("coupled2", spd_coupled()),
        ("dominant10", spd_diagonally_dominant(10, 7)),
        ("dominant50", spd_diagonally_dominant(50, 11)),
    ]
}

/// The coupled 2×2 system under a bursty schedule with adversarial reads, started so that
/// the first stale reads point the wrong way.
pub fn adversarial_preset() -> (SpdProblem, Point, RunConfig) {
    let cfg = RunConfig::new(
        SchedulePolicy::BurstyAdversarial { target: 0, burst: 4 },
        StalenessPolicy::AdversarialInBox,
        40.0,
        2024,
    );
    (spd_coupled(), Point::new(vec![1.0, 4.0]).expect("finite"), cfg)
}

/// `Σ f_j(p_j) + ½‖Ap − b‖²` with `rows × cols` Gaussian-ish `A` and mixed separable terms.
pub fn composite_random(rows: usize, cols: usize, seed: u64) -> CompositeProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    let b = DVector::from_fn(rows, |_, _| rng.gen_range(-2.0..2.0));
    let terms = (0..cols)
        .map(|j| match j % 3 {
            0 => Univariate::Quadratic { center: rng.gen_range(-1.0..1.0), weight: rng.gen_range(0.1..1.0) },
            1 => Univariate::PseudoHuber { center: rng.gen_range(-1.0..1.0), delta: rng.gen_range(0.2..2.0) },
            _ => Univariate::Zero,
        })
        .collect();
    CompositeProblem::new(a, b, terms).expect("valid preset")
}

/// Ridge-regularized least squares; the minimum is known in closed form.
pub fn composite_ridge() -> CompositeProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let a = DMatrix::from_fn(8, 6, |_, _| rng.gen_range(-1.0..1.0));
    let b = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
    let terms = vec![Univariate::Quadratic { center: 0.0, weight: 0.5 }; 6];
    CompositeProblem::new(a, b, terms).expect("valid preset")
}

/// Symmetric one-buyer CES market with equilibrium `(1, 1)`.
pub fn ces_symmetric() -> CesMarket {
    CesMarket::new(2, vec![CesBuyer { e: 2.0, rho: -1.0, a: vec![1.0, 1.0] }]).expect("valid preset")
}

fn ces_random(goods: usize, buyers: usize, seed: u64) -> CesMarket {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let list = (0..buyers)
        .map(|_| CesBuyer {
            e: rng.gen_range(0.5..2.0),
            rho: -rng.gen_range(0.3..4.0),
            a: (0..goods).map(|_| rng.gen_range(0.2..2.0)).collect(),
        })
        .collect();
    CesMarket::new(goods, list).expect("valid preset")
}

/// Five CES markets with at most ten goods and five buyers, each with a starting price vector.
pub fn ces_suite() -> Vec<(&'static str, CesMarket, Point)> {
    let two = CesMarket::new(3, vec![
        CesBuyer { e: 1.0, rho: -0.5, a: vec![1.0, 2.0, 0.5] },
        CesBuyer { e: 1.5, rho: -2.0, a: vec![0.5, 1.0, 3.0] },
    ])
    .expect("valid preset");
    let tight = CesMarket::new(4, vec![
        CesBuyer { e: 1.0, rho: -4.0, a: vec![1.0, 1.0, 1.0, 0.0] },
        CesBuyer { e: 2.0, rho: -4.0, a: vec![0.0, 1.0, 2.0, 1.0] },
    ])
    .expect("valid preset");
    let start = |m: &CesMarket, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m.buyer_list()[0].a.len();
        let base: f64 = m.buyer_list().iter().map(|b| b.e).sum::<f64>() / n as f64;
        Point::new((0..n).map(|_| base * rng.gen_range(0.5..1.5)).collect()).expect("finite")
    };
    let five = ces_random(5, 3, 41);
    let ten = ces_random(10, 5, 43);
    vec![
        ("symmetric", ces_symmetric(), Point::new(vec![0.7, 1.3]).expect("finite")),
        ("two_buyers", two.clone(), start(&two, 1)),
        ("tight", tight.clone(), start(&tight, 2)),
        ("five_goods", five.clone(), start(&five, 3)),
        ("ten_goods", ten.clone(), start(&ten, 4)),
    ]
}

/// Leontief market built to clear at `prices` with allocation `alloc` (columns sum to one)
/// and utility levels `utils`.
fn leontief_clearing(alloc: &[Vec<f64>], utils: &[f64], prices: &[f64]) -> LeontiefMarket {
    let goods = prices.len();
    let buyers = alloc
        .iter()
        .zip(utils)
        .map(|(row, &u)| {
            let set: Vec<usize> = (0..goods).filter(|&j| row[j] > 0.0).collect();
            LeontiefBuyer {
                e: set.iter().map(|&j| prices[j] * row[j]).sum(),
                b: set.iter().map(|&j| u / row[j]).collect(),
                goods: set,
            }
        })
        .collect();
    LeontiefMarket::new(goods, buyers).expect("valid preset")
}

/// Three Leontief markets whose goods all clear at positive prices, with starting prices.
pub fn leontief_suite() -> Vec<(&'static str, LeontiefMarket, Point)> {
    let singletons = LeontiefMarket::new(2, vec![
        LeontiefBuyer { e: 0.6, goods: vec![0], b: vec![1.0] },
        LeontiefBuyer { e: 0.4, goods: vec![1], b: vec![1.0] },
    ])
    .expect("valid preset");
    let overlap = leontief_clearing(
        &[vec![0.5, 0.7, 0.0], vec![0.5, 0.3, 1.0]],
        &[1.0, 2.0],
        &[0.8, 0.5, 0.6],
    );
    let three = leontief_clearing(
        &[vec![0.6, 0.2, 0.0, 0.3], vec![0.4, 0.0, 0.5, 0.3], vec![0.0, 0.8, 0.5, 0.4]],
        &[1.0, 0.5, 1.5],
        &[0.4, 0.9, 0.6, 0.3],
    );
    vec![
        ("singletons", singletons, Point::new(vec![1.0, 1.0]).expect("finite")),
        ("overlap", overlap, Point::new(vec![1.0, 1.0, 1.0]).expect("finite")),
        ("three_buyers", three, Point::new(vec![0.5, 0.5, 0.5, 0.5]).expect("finite")),
    ]
}

/// The symmetric CES market at its equilibrium prices with slightly unbalanced warehouses.
pub fn ongoing_demo() -> (CesMarket, Point, OngoingConfig) {
    let lambda = vec![1.0 / 60.0; 2];
    let cfg = OngoingConfig::with_default_kappa(vec![1.0, 1.0], vec![0.04, -0.03], lambda);
    (ces_symmetric(), Point::new(vec![1.0, 1.0]).expect("finite"), cfg)
}
