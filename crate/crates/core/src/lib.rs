//! Stochastic earned duration management.
//!
//! Monte Carlo simulation of activity networks, earned-duration curve
//! analytics, milestone anomaly scoring by 2-D kernel density estimation,
//! delay classification and final-duration regression, and a MAPE
//! benchmark against earned schedule and cost-based stochastic control.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod montecarlo;
pub mod network;
pub mod milestone;
pub mod stats;
pub mod statlearn;
pub mod bench;
pub mod files;
