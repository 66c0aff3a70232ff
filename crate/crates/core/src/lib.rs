//! Trust-region method for smooth nonconvex objectives under linear
//! inequality constraints `A x <= b`.
//!
//! The crate provides exact global solvers for the constrained trust-region
//! subproblem, first- and second-order stationarity measures, the first-order
//! and second-order trust-region drivers, a trace format with an offline
//! invariant checker, and brute-force oracles used for verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod error;
pub mod lc_trace;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod second_order;
pub mod stationarity;
pub mod subproblem;
pub mod suite;
pub mod trace;

pub use error::{Error, Result};
