//! The first-order trust-region driver.
//!
//! Each iteration solves the constrained subproblem exactly, classifies the
//! trial step by its cubic decrease ratio and the multiplier-to-norm ratio,
//! and then accepts, expands or contracts the radius.

mod config;
mod contract;
mod engine;
mod ledger;
mod steps;

pub use config::{SolverConfig, Tolerances};
pub use contract::{contract, contract_cap, ContractInput, ContractOutcome};
pub use engine::{run_first_order, FirstOrderEngine, RunOutcome};
pub use ledger::{finalize_ledger, lambda_max, sigma_lower, sigma_max_bound, sigma_upper, ConstantsLedger};
pub use steps::{accept_update, classify_step, expand_update, AcceptedState, StepClass};
