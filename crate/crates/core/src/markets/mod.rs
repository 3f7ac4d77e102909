//! Fisher markets with complementary goods and price dynamics driven by excess demand.

mod demand;
mod dynamics;
mod io;

pub use demand::{
    aggregate_demand, ces_hessian_bound, demand, excess_demand, market_potential, potential_hessian, CesBuyer,
    CesMarket, FisherMarket, LeontiefBuyer, LeontiefMarket, Market,
};
pub use dynamics::{
    check_lambda, equilibrium_oracle, lyapunov_ongoing, market_control_params, ongoing_states, ongoing_step,
    run_tatonnement, tatonnement_step, warehouse_integrate, Equilibrium, MarketOptions, MarketRun, OngoingConfig,
    OngoingSteps, TatonnementMode, TatonnementSteps, BALANCE_MAX, KAPPA_RATIO_MAX, LAMBDA_MAX, ONGOING_LAMBDA_MAX,
    ORACLE_MAX_ROUNDS,
};
pub use io::{load_market, parse_market, MarketFile};
