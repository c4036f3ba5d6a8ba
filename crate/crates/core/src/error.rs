//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by model construction, solvers, geometry, the adaptive
/// law, and the simulator.
///
/// Runtime *events* that a simulation records and survives (safe-set exit)
/// are not errors; see [`crate::sim::Verdict`]. Events that make the
/// closed-loop problem ill-posed mid-run (barrier breach, reference escape,
/// numerical blowup) are raised as errors by the low-level operations and
/// converted into verdicts by the run loop.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Inconsistent dimensions or otherwise invalid configuration data.
    #[error("configuration error: {0}")]
    Config(String),

    /// A linear-algebra solve failed (non-Hurwitz matrix, singular system,
    /// indefinite right-hand side).
    #[error("solver error: {0}")]
    Solver(String),

    /// A parameter component left its admissible hypercube.
    #[error("parameter {index} = {value} outside [{lo}, {hi}]")]
    ParameterOutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Unsupported or inconsistent level-set pair.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The reference state left the safe set, so the time-varying
    /// performance bound is undefined.
    #[error("reference state left the safe set at t = {t}")]
    ReferenceEscape { t: f64 },

    /// The barrier reached zero: h(t, e) <= 0.
    #[error("barrier breach at t = {t}: h = {h}")]
    BarrierBreach { t: f64, h: f64 },

    /// Too few samples for the requested estimate.
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The initial condition violates the containment required to start
    /// an adaptive run.
    #[error("setup error: {0}")]
    Setup(String),

    /// A non-finite value appeared during integration.
    #[error("numerical blowup at t = {t}")]
    NumericalBlowup { t: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
