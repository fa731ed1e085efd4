//! The CTESN surrogate algorithm.
//!
//! A continuous-time echo state network drives a fixed random non-stiff
//! reservoir ODE with one reference solution of the full model, then learns
//! cheap projections from the reservoir trajectory back to model outputs:
//!
//! - **LP** (linear projection): one least-squares matrix per training
//!   parameter, interpolated over the parameter box with an RBF.
//! - **NP** (nonlinear projection): a shared-center RBF from reservoir
//!   states to outputs per training parameter; its stacked weight matrix is
//!   interpolated over the box instead. Reservoirs three orders of magnitude
//!   smaller reach comparable accuracy.
//!
//! Prediction never solves the full model: it evaluates the parameter map
//! and contracts the stored reservoir trajectory with the resulting weights.

mod lsq;
mod predict;
mod reservoir;
mod train;
mod validate;

pub use lsq::{svd_least_squares, SvdSolver};
pub use predict::{predict_lp, predict_np, predict_rows, Prediction};
pub use reservoir::{build_reservoir, simulate_reservoir, spectral_radius_dense};
pub use train::{train_lpctesn, train_npctesn, TrainOptions};
pub use validate::{validate_surrogate, ValidateOptions};

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rbf::RbfInterpolant;
use crate::sampling::ParameterSpace;
use crate::timeseries::{SplineSeries, Trajectory};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("reservoir draw has zero spectral radius (N_R = {n_r}, density = {density})")]
    ZeroSpectralRadius { n_r: usize, density: f64 },
    #[error("reference solve diverged at training point {index} (p = {params:?}): {source}")]
    TrainingDiverged {
        index: usize,
        params: Vec<f64>,
        source: crate::integrators::IntegrateError,
    },
    #[error("shared center selection failed: {0}")]
    CenterSelectionFailed(String),
    #[error("n_train = {got} is below the minimum {need} for dimension {dim}")]
    TooFewSamples { got: usize, need: usize, dim: usize },
    #[error("invalid training input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Integrate(#[from] crate::integrators::IntegrateError),
    #[error(transparent)]
    Rbf(#[from] crate::rbf::RbfError),
    #[error(transparent)]
    Timeseries(#[from] crate::timeseries::TimeseriesError),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
}

/// Elementwise reservoir activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Reservoir hyperparameters; fully determine `(A, W_hyb)` given a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    /// Reservoir dimension N_R.
    pub n_r: usize,
    /// Fraction of nonzeros in A, in (0, 1].
    pub density: f64,
    /// Target spectral radius of A after rescaling.
    pub spectral_radius: f64,
    /// Entries of W_hyb drawn uniformly from [-input_scale, input_scale].
    pub input_scale: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl ReservoirSpec {
    /// Defaults: spectral radius 1, unit input scale, tanh; density 0.01 for
    /// reservoirs of 1000 and above, 0.1 down to 10, dense below that (tiny
    /// sparse draws are frequently nilpotent and would fail the spectral
    /// radius rescale).
    pub fn with_defaults(n_r: usize, seed: u64) -> Self {
        let density = if n_r >= 1000 {
            0.01
        } else if n_r >= 10 {
            0.1
        } else {
            1.0
        };
        Self {
            n_r,
            density,
            spectral_radius: 1.0,
            input_scale: 1.0,
            activation: Activation::Tanh,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.n_r < 1 {
            return Err(TrainError::InvalidInput("N_R must be at least 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(TrainError::InvalidInput("density must lie in (0, 1]".into()));
        }
        if !(self.spectral_radius > 0.0) {
            return Err(TrainError::InvalidInput("spectral radius must be positive".into()));
        }
        Ok(())
    }
}

/// Sparse row-major matrix for the reservoir connectivity A.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub n: usize,
    /// (column, value) pairs per row, columns ascending.
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl SparseRows {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * x[j as usize];
            }
            out[i] = acc;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for row in &mut self.rows {
            for (_, v) in row {
                *v *= factor;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j as usize)] = v;
            }
        }
        m
    }
}

/// Realized reservoir: sparse connectivity, dense input weights, zero start.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMatrices {
    pub a: SparseRows,
    /// `n_r x n_in` dense input weights.
    pub w_hyb: DMatrix<f64>,
    pub r0: Vec<f64>,
    /// Spectral radius realized after rescaling.
    pub realized_rho: f64,
}

/// Affine per-output normalization to [-1, 1] from the reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputNorm {
    pub center: Vec<f64>,
    pub halfwidth: Vec<f64>,
}

impl OutputNorm {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let nv = traj.n_vars();
        let mut center = vec![0.0; nv];
        let mut halfwidth = vec![0.0; nv];
        for v in 0..nv {
            let col = traj.values().column(v);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            center[v] = 0.5 * (lo + hi);
            let w = 0.5 * (hi - lo);
            halfwidth[v] = if w > 0.0 { w } else { center[v].abs().max(1.0) };
        }
        Self { center, halfwidth }
    }

    pub fn normalize(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(values.nrows(), values.ncols(), |i, v| {
            (values[(i, v)] - self.center[v]) / self.halfwidth[v]
        })
    }

    pub fn denormalize_into(&self, row: &mut [f64]) {
        for (v, x) in row.iter_mut().enumerate() {
            *x = self.center[v] + *x * self.halfwidth[v];
        }
    }
}

/// Surrogate variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Lp,
    Np,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Lp => write!(f, "lp"),
            Variant::Np => write!(f, "np"),
        }
    }
}

/// Trained projection payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// RBF from parameters to vec(W_out), W_out `n_out x n_r`, row-major.
    Lp { map: RbfInterpolant },
    /// RBF from parameters to vec(beta), beta `(k_c + n_r + 1) x n_out`,
    /// row-major, plus the shared reservoir-space centers (normalized
    /// coordinates) and the normalization that produced them.
    Np {
        map: RbfInterpolant,
        centers: DMatrix<f64>,
        r_norm_lo: Vec<f64>,
        r_norm_width: Vec<f64>,
    },
}

impl Payload {
    pub fn variant(&self) -> Variant {
        match self {
            Payload::Lp { .. } => Variant::Lp,
            Payload::Np { .. } => Variant::Np,
        }
    }
}

/// Deterministic training metadata carried into the serialized artifact.
/// Wall-clock timings are deliberately excluded (they live in the
/// diagnostic report) so artifacts stay byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n_train: usize,
    pub seed: u64,
    pub rcond: f64,
    pub ridge: f64,
    pub np_centers: usize,
    /// Max over training points of the mean relative reconstruction error
    /// (percent) of the assembled surrogate against its own training data.
    pub train_self_error_pct: f64,
}

/// A trained CTESN surrogate: everything prediction needs, no model calls.
pub struct TrainedSurrogate {
    pub spec: ReservoirSpec,
    pub p_star: Vec<f64>,
    pub space: ParameterSpace,
    pub labels: Vec<String>,
    pub out_norm: OutputNorm,
    /// Physical save-grid times shared by reservoir and projections.
    pub grid_times: Vec<f64>,
    /// Reservoir trajectory samples, `n_save x n_r`, on the save grid.
    pub r_values: DMatrix<f64>,
    pub payload: Payload,
    pub train_meta: TrainMeta,
    /// Parameter-independent feature matrix on the save grid (lazy).
    feature_cache: OnceLock<DMatrix<f64>>,
    /// Reservoir spline over the grid-index coordinate (lazy).
    r_spline: OnceLock<SplineSeries>,
}

impl TrainedSurrogate {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        spec: ReservoirSpec,
        p_star: Vec<f64>,
        space: ParameterSpace,
        labels: Vec<String>,
        out_norm: OutputNorm,
        grid_times: Vec<f64>,
        r_values: DMatrix<f64>,
        payload: Payload,
        train_meta: TrainMeta,
    ) -> Self {
        Self {
            spec,
            p_star,
            space,
            labels,
            out_norm,
            grid_times,
            r_values,
            payload,
            train_meta,
            feature_cache: OnceLock::new(),
            r_spline: OnceLock::new(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.payload.variant()
    }

    pub fn n_outputs(&self) -> usize {
        self.labels.len()
    }

    pub fn n_save(&self) -> usize {
        self.grid_times.len()
    }

    /// Predict outputs at `p` on the given times (either variant).
    pub fn predict(&self, p: &[f64], times: &[f64]) -> Result<Prediction, TrainError> {
        match self.payload {
            Payload::Lp { .. } => predict_lp(self, p, times),
            Payload::Np { .. } => predict_np(self, p, times),
        }
    }
}

#[cfg(test)]
mod tests;
