//! Quadratic-covariation derivatives, martingale representations and
//! digital-option replication on simulated Brownian paths.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod clark_ocone;
pub mod deterministic;
pub mod error;
pub mod heat_kernel;
pub mod hedging;
pub mod ito;
pub mod paths;
pub mod payoff;
pub mod qcov;
pub mod quadrature;
pub mod stats;
