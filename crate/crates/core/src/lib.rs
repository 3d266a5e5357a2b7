//! Numerical toolkit for slow-fast ODE systems that are monotone with respect
//! to rank-k quadratic cones.
//!
//! - [`cone`]: quadratic cones, membership and sampling.
//! - [`dynsys`]: vector-field expressions, parsing, exact Jacobians, built-ins.
//! - [`integrate`]: adaptive integration, chord and fundamental matrices.
//! - [`slowfast`]: critical and slow manifolds, reduced flow.
//! - [`certify`]: cooperativity certificates and order checks.
//! - [`limitsets`]: equilibria, periodic orbits, ω-limit classification.

pub mod certify;
pub mod cone;
pub mod dynsys;
pub mod error;
pub mod integrate;
pub mod limitsets;
pub mod linalg;
pub mod slowfast;

pub use error::{Error, Result};
