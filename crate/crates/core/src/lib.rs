//! Alignment dynamics of self-propelled orientations on the sphere: closed
//! forms and numerics for the equilibria, their stability, convergence rates,
//! and a conservative time integrator on the circle.
//!
//! Everything is generic over [`Scalar`] (both `f32` and `f64` implement it).
//! The `f64` aliases below cover the common case.

// `!(x > 0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod coefficients;
pub mod error;
pub mod export;
pub mod hysteresis;
mod linalg;
pub mod poincare;
mod quadrature;
pub mod rates;
mod roots;
pub mod scalar;
pub mod solver;
pub mod vonmises;

pub use bifurcation::{EquilibriumBranch, Fold, PhaseDiagram, Root, Stability};
pub use coefficients::{CoefficientModel, Coefficients, FnModel, ModelKind};
pub use error::{Error, Result};
pub use hysteresis::{HysteresisParams, HysteresisRun};
pub use scalar::Scalar;
pub use solver::{Diagnostics, InitialCondition, SimulationParams, SolverState, Trajectory};
pub use vonmises::Dimension;

pub type Model = CoefficientModel<f64>;
pub type Model32 = CoefficientModel<f32>;
pub type State = SolverState<f64>;
pub type State32 = SolverState<f32>;
pub type Branch = EquilibriumBranch<f64>;
pub type Branch32 = EquilibriumBranch<f32>;
pub type Hysteresis = HysteresisParams<f64>;
pub type Hysteresis32 = HysteresisParams<f32>;
