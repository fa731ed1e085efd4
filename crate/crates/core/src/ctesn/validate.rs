//! Surrogate validation against the full model on held-out Sobol points.

use std::time::Instant;

use super::{TrainError, TrainedSurrogate};
use crate::integrators::SolveOptions;
use crate::models::ParametrizedModel;
use crate::report::{DiagnosticReport, ErrorHistogram, OutputErrorStats};
use crate::sampling::sobol_sample;
use crate::timeseries::relative_error_series;

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Points on the error-evaluation time grid.
    pub n_error_points: usize,
    /// Full model solves.
    pub solve_opts: SolveOptions,
    /// Histogram bins.
    pub bins: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { n_error_points: 1000, solve_opts: SolveOptions::reference(), bins: 10 }
    }
}

impl ValidateOptions {
    /// Defaults with truth solves at the model's own tolerances.
    pub fn for_model(model: &crate::models::ParametrizedModel) -> Self {
        Self { solve_opts: model.reference_solve_opts(), ..Default::default() }
    }
}

/// Draw `n_test` Sobol points, run the full model and the surrogate at each,
/// and assemble per-output error statistics, the per-point mean-of-max error
/// histogram, and full-solve vs prediction timing.
pub fn validate_surrogate(
    surr: &TrainedSurrogate,
    model: &ParametrizedModel,
    n_test: usize,
    opts: &ValidateOptions,
) -> Result<DiagnosticReport, TrainError> {
    if model.n_outputs() != surr.n_outputs() {
        return Err(TrainError::InvalidInput(format!(
            "model has {} outputs, surrogate {}",
            model.n_outputs(),
            surr.n_outputs()
        )));
    }
    if n_test < 1 {
        return Err(TrainError::InvalidInput("n_test must be at least 1".into()));
    }
    let points = sobol_sample(&surr.space, n_test)?;
    let mut grid = model.error_grid.clone();
    grid.n_points = opts.n_error_points;

    let nv = surr.n_outputs();
    let mut max_per_output = vec![0.0f64; nv];
    let mut avg_per_output = vec![0.0f64; nv];
    let mut fallback = vec![false; nv];
    let mut mean_max_per_point = Vec::with_capacity(n_test);
    let mut avg_acc = 0.0;
    let mut solve_s = 0.0;
    let mut predict_s = 0.0;

    for (i, p) in points.iter().enumerate() {
        let t0 = Instant::now();
        let truth = model.solve(p, &opts.solve_opts).map_err(|e| TrainError::TrainingDiverged {
            index: i,
            params: p.clone(),
            source: e,
        })?;
        solve_s += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let pred = surr.predict(p, &surr.grid_times)?;
        predict_s += t1.elapsed().as_secs_f64();

        let err = relative_error_series(
            &pred.trajectory.to_spline()?,
            &truth.to_spline()?,
            &grid,
        )?;
        let maxes = err.max_per_var();
        let avgs = err.avg_per_var();
        for v in 0..nv {
            max_per_output[v] = max_per_output[v].max(maxes[v]);
            avg_per_output[v] += avgs[v];
            fallback[v] |= err.absolute_fallback[v];
        }
        avg_acc += err.avg();
        mean_max_per_point.push(maxes.iter().sum::<f64>() / nv as f64 * 100.0);
    }

    let per_output = (0..nv)
        .map(|v| OutputErrorStats {
            label: surr.labels[v].clone(),
            max_rel_err_pct: max_per_output[v] * 100.0,
            avg_rel_err_pct: avg_per_output[v] / n_test as f64 * 100.0,
            absolute_fallback: fallback[v],
        })
        .collect();

    let histogram = ErrorHistogram::from_values(&mean_max_per_point, opts.bins);
    let full_solve_mean_s = solve_s / n_test as f64;
    let predict_mean_s = predict_s / n_test as f64;

    Ok(DiagnosticReport {
        model: model.name.clone(),
        variant: surr.variant().to_string(),
        reservoir_size: surr.spec.n_r,
        per_output,
        avg_rel_err_pct: avg_acc / n_test as f64 * 100.0,
        mean_max_per_point_pct: mean_max_per_point,
        histogram,
        space: surr.space.clone(),
        n_train: surr.train_meta.n_train,
        n_test,
        reservoir_seed: surr.spec.seed,
        sampling_seed: surr.train_meta.seed,
        full_solve_mean_s,
        predict_mean_s,
        speedup: full_solve_mean_s / predict_mean_s,
        normalization: "per-output sup-norm scale: |pred - truth| / max_t |truth|".into(),
        error_grid: grid.describe(),
        tool_version: crate::VERSION.into(),
    })
}
