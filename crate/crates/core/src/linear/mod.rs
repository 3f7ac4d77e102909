//! Linear systems and composite least-squares objectives.

mod composite;
mod gram;
mod mtx;
mod solve;
mod spd;

pub use composite::{composite_gamma_bound, CompositeProblem, Univariate};
pub use gram::{CachedSteps, GramCache, REANCHOR_EVERY};
pub use mtx::{
    matrix_market_string, parse_matrix_market, parse_vector, read_matrix_market, read_vector, symmetrize,
    vector_string, write_matrix_market, write_vector, SYMMETRY_TOL,
};
pub use solve::{solve_composite, solve_spd, time_to_residual, Solution, SolveOptions};
pub use spd::{spd_gamma_bound, SpdProblem, GAMMA_MARGIN};
