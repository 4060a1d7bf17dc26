//! Adaptive finite elements for control-constrained semilinear elliptic
//! optimal control problems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod adapt;
pub mod bench;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod mesh;
pub mod nonlinearity;
pub mod ocp;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations of the generic types.
pub type Mesh = mesh::Mesh<f64>;
pub type P1Function = fem::P1Function<f64>;
pub type P0Function = fem::P0Function<f64>;
pub type ControlProblem = ocp::ControlProblem<f64>;
pub type KktSolution = ocp::KktSolution<f64>;
pub type KktState = ocp::KktState<f64>;
pub type IndicatorField = estimator::IndicatorField<f64>;
pub type Estimate = estimator::Estimate<f64>;
pub type ManufacturedCase = bench::ManufacturedCase<f64>;
pub type AdaptOutcome = adapt::AdaptOutcome<f64>;
