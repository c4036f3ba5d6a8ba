//! Safety-critical model reference adaptive control.
//!
//! This crate simulates uncertain nonlinear systems driven toward a
//! nonlinear reference model by a barrier-weighted, projection-based
//! adaptive law. The tracking error is kept inside a performance bound
//! derived from safe-set geometry, so the plant state never leaves the
//! safe set regardless of the adaptation rate.
//!
//! Module map:
//! - [`model`]: plant, uncertainty parameterization, reference model.
//! - [`certify`]: nominal controllers and Lyapunov certificates.
//! - [`safety`]: level sets, performance bounds, rate monitoring.
//! - [`adapt`]: projection operator, barrier, control and update laws.
//! - [`sim`]: fixed-step closed-loop integration and experiment drivers.
//! - [`selfcheck`]: slow brute-force oracles for cross-validation.

pub mod adapt;
pub mod certify;
pub mod error;
pub mod model;
pub mod safety;
pub mod selfcheck;
pub mod sim;

pub use error::{Error, Result};
