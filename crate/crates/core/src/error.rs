//! Crate-wide error type aggregating the per-subsystem errors.

use thiserror::Error;

/// Top-level error for pipeline operations that cross subsystems
/// (training, validation, optimization, co-simulation).
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Integrate(#[from] crate::integrators::IntegrateError),
    #[error(transparent)]
    Timeseries(#[from] crate::timeseries::TimeseriesError),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
    #[error(transparent)]
    Rbf(#[from] crate::rbf::RbfError),
    #[error(transparent)]
    Train(#[from] crate::ctesn::TrainError),
    #[error(transparent)]
    Optimize(#[from] crate::optimize::OptimizeError),
    #[error(transparent)]
    Cosim(#[from] crate::cosim::CosimError),
    #[error(transparent)]
    Artifact(#[from] crate::artifact::ArtifactError),
}
