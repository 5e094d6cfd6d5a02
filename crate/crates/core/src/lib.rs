//! Logistic growth with harvesting, `z' = a(t) z - z^2 - k gamma(t)`, and the
//! Bernoulli equation `z' = a(t) z - b(t) z^2`.
//!
//! * [`expr`]: coefficient functions parsed from text.
//! * [`quad`]: adaptive Gauss-Kronrod quadrature and improper-integral verdicts.
//! * [`exact`]: closed-form Bernoulli solutions, blow-down times, the special
//!   solution through `-1/J`, and fate classification.
//! * [`ivp`]: Dormand-Prince integration with blow-down detection.
//! * [`harvest`]: critical harvesting level, separation of solutions.
//! * [`periodic`]: Poincare map, periodic branches and their turning point.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar type.

// `!(x > 0)` style guards reject NaN along with the failing values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficient;
pub mod error;
pub mod exact;
pub mod expr;
pub mod harvest;
pub mod ivp;
pub mod periodic;
pub mod quad;
pub mod scalar;

pub use coefficient::{Coef, Coefficient};
pub use error::{Error, Result};
pub use scalar::Real;

pub type Coef64 = Coef<f64>;
pub type Coef32 = Coef<f32>;
pub type Trajectory64 = ivp::Trajectory<f64>;
pub type Trajectory32 = ivp::Trajectory<f32>;
pub type IntegralVerdict64 = quad::IntegralVerdict<f64>;
pub type IntegralVerdict32 = quad::IntegralVerdict<f32>;
pub type ExactSolution64 = exact::ExactSolution<f64>;
pub type ExactSolution32 = exact::ExactSolution<f32>;
pub type ParticularSolution64 = harvest::ParticularSolution<f64>;
pub type ParticularSolution32 = harvest::ParticularSolution<f32>;
pub type PeriodicProblem64 = periodic::PeriodicProblem<f64>;
pub type PeriodicProblem32 = periodic::PeriodicProblem<f32>;
