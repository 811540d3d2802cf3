//! Optimal inflow control of a transport line whose outflow should meet an
//! Ornstein-Uhlenbeck demand, with an undersupply penalty.
//!
//! * [`demand`]: the demand process, its Gaussian transition law and exact
//!   path sampling.
//! * [`transport`]: the upwind-discretized line `∂ρ/∂t + λ∂ρ/∂x = 0`.
//! * [`objective`]: tracking and undersupply terms per output node.
//! * [`control`]: open-loop (CM1) and receding-horizon (CM2) solvers.
//! * [`montecarlo`]: seeded path ensembles comparing the two.

// `!(x > y)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod demand;
pub mod error;
pub mod montecarlo;
pub mod objective;
pub mod quadrature;
pub mod special;
pub mod transport;

pub use error::{Error, Result};
