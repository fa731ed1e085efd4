//! Continuous-time echo state network (CTESN) surrogates for stiff
//! parametrized ODE models.
//!
//! The crate covers the full surrogate workflow:
//!
//! 1. reference simulation of a stiff parametrized model over a sampled
//!    parameter space ([`integrators`], [`models`], [`sampling`]),
//! 2. training of a linear-projection (LP) or nonlinear-projection (NP)
//!    CTESN surrogate on those trajectories ([`ctesn`], [`rbf`]),
//! 3. validation against the full model with per-output error statistics
//!    and timing ([`ctesn::validate`], [`report`]),
//! 4. deployment: black-box global optimization over the surrogate
//!    ([`optimize`]) and drop-in co-simulation ([`cosim`]),
//! 5. persistence of trained surrogates as a checksummed JSON artifact
//!    ([`artifact`]).

pub mod artifact;
pub mod cosim;
pub mod ctesn;
pub mod error;
pub mod integrators;
pub mod models;
pub mod optimize;
pub mod rbf;
pub mod report;
pub mod sampling;
pub mod timeseries;

pub use error::Error;

/// Crate version string recorded in reports and artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
