//! Simulation and estimation laboratory for conduct-parameter identification
//! in a homogeneous-goods market with log-linear demand and marginal cost.
//!
//! The crate generates synthetic market equilibria, estimates the demand and
//! supply equations by two-stage least squares, recovers the conduct
//! parameter from the supply intercept, and aggregates bias/RMSE over Monte
//! Carlo replications. It also ships two analytic checks on the demand
//! function (separability and the exceptional separable family) and a
//! constructive demonstration of conduct-parameter non-identification for
//! additively separable linear demand.

pub mod cli;
pub mod dgp;
pub mod error;
pub mod estimation;
pub mod identlab;
pub mod model;
pub mod montecarlo;

pub use error::{Error, Result};
pub use model::{EquilibriumPoint, ExogenousDraw, StructuralParams};
