//! Surrogate prediction. Never touches the full model: one RBF evaluation
//! per call plus a contraction of the stored reservoir trajectory.

use nalgebra::DMatrix;

use super::train::{np_feature_row, payload_map, payload_matrix};
use super::{Payload, TrainError, TrainedSurrogate, Variant};
use crate::timeseries::{SplineSeries, Trajectory};

/// A surrogate prediction plus the extrapolation flag (the requested
/// parameter point lies outside the trained box; the prediction is still
/// returned).
#[derive(Debug, Clone)]
pub struct Prediction {
    pub trajectory: Trajectory,
    pub extrapolated: bool,
}

/// Predict with a linear-projection surrogate.
pub fn predict_lp(
    surr: &TrainedSurrogate,
    p: &[f64],
    times: &[f64],
) -> Result<Prediction, TrainError> {
    if surr.variant() != Variant::Lp {
        return Err(TrainError::InvalidInput("surrogate is not the LP variant".into()));
    }
    predict_any(surr, p, times)
}

/// Predict with a nonlinear-projection surrogate.
pub fn predict_np(
    surr: &TrainedSurrogate,
    p: &[f64],
    times: &[f64],
) -> Result<Prediction, TrainError> {
    if surr.variant() != Variant::Np {
        return Err(TrainError::InvalidInput("surrogate is not the NP variant".into()));
    }
    predict_any(surr, p, times)
}

fn predict_any(
    surr: &TrainedSurrogate,
    p: &[f64],
    times: &[f64],
) -> Result<Prediction, TrainError> {
    if times.len() < 2 {
        return Err(TrainError::InvalidInput("need at least two prediction times".into()));
    }
    let (rows, extrapolated) = predict_rows(surr, p, times)?;
    let trajectory = Trajectory::new(times.to_vec(), rows, surr.labels.clone())?;
    Ok(Prediction { trajectory, extrapolated })
}

/// Raw prediction rows (`times.len() x n_out`, physical units) plus the
/// extrapolation flag. Exposed for callers that predict at very few times
/// (co-simulation units).
pub fn predict_rows(
    surr: &TrainedSurrogate,
    p: &[f64],
    times: &[f64],
) -> Result<(DMatrix<f64>, bool), TrainError> {
    if p.len() != surr.space.dim() {
        return Err(TrainError::InvalidInput(format!(
            "parameter point has dimension {}, surrogate expects {}",
            p.len(),
            surr.space.dim()
        )));
    }
    let extrapolated = !surr.space.contains(p);
    let n_out = surr.n_outputs();
    let mapped = payload_map(&surr.payload).eval(p);
    let b = payload_matrix(&surr.payload, &mapped, n_out);

    let mut rows = if times_match_grid(surr, times) {
        // parameter-independent feature matrix, contracted in one product
        feature_matrix(surr) * &b
    } else {
        general_rows(surr, times, &b)
    };
    for v in 0..n_out {
        let c = surr.out_norm.center[v];
        let h = surr.out_norm.halfwidth[v];
        for x in rows.column_mut(v).iter_mut() {
            *x = c + *x * h;
        }
    }
    Ok((rows, extrapolated))
}

fn times_match_grid(surr: &TrainedSurrogate, times: &[f64]) -> bool {
    times.len() == surr.grid_times.len()
        && times.iter().zip(&surr.grid_times).all(|(a, b)| a == b)
}

/// Features on the save grid: the reservoir states themselves (LP) or the
/// kernel-plus-tail expansion against the shared centers (NP). Both are
/// independent of the parameter point, so they are computed once.
fn feature_matrix(surr: &TrainedSurrogate) -> &DMatrix<f64> {
    surr.feature_cache.get_or_init(|| match &surr.payload {
        Payload::Lp { .. } => surr.r_values.clone(),
        Payload::Np { centers, r_norm_lo, r_norm_width, .. } => {
            super::train::np_feature_matrix(&surr.r_values, centers, r_norm_lo, r_norm_width)
        }
    })
}

fn r_spline(surr: &TrainedSurrogate) -> &SplineSeries {
    surr.r_spline.get_or_init(|| {
        let n = surr.r_values.nrows();
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels = (0..surr.r_values.ncols()).map(|v| format!("r{v}")).collect();
        Trajectory::new(times, surr.r_values.clone(), labels)
            .expect("reservoir trajectory is a valid time series")
            .to_spline()
            .expect("reservoir spline")
    })
}

/// Map a physical time onto the save-grid index coordinate (piecewise
/// linear between grid points, clamped outside).
fn index_of_time(grid: &[f64], t: f64) -> f64 {
    let n = grid.len();
    if t <= grid[0] {
        return 0.0;
    }
    if t >= grid[n - 1] {
        return (n - 1) as f64;
    }
    let j = match grid.binary_search_by(|g| g.partial_cmp(&t).unwrap()) {
        Ok(j) => return j as f64,
        Err(j) => j - 1,
    };
    j as f64 + (t - grid[j]) / (grid[j + 1] - grid[j])
}

fn general_rows(surr: &TrainedSurrogate, times: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let n_out = surr.n_outputs();
    let n_r = surr.r_values.ncols();
    let spline = r_spline(surr);
    let mut out = DMatrix::zeros(times.len(), n_out);
    let mut r = vec![0.0; n_r];
    let nf = b.nrows();
    let mut feat = vec![0.0; nf];
    for (i, &t) in times.iter().enumerate() {
        let s = index_of_time(&surr.grid_times, t);
        spline.eval_into(s, &mut r);
        match &surr.payload {
            Payload::Lp { .. } => feat.copy_from_slice(&r),
            Payload::Np { centers, r_norm_lo, r_norm_width, .. } => {
                np_feature_row(&r, centers, r_norm_lo, r_norm_width, &mut feat);
            }
        }
        for o in 0..n_out {
            let mut acc = 0.0;
            for f in 0..nf {
                acc += feat[f] * b[(f, o)];
            }
            out[(i, o)] = acc;
        }
    }
    out
}
