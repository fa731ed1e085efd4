//! LP and NP surrogate training.
//!
//! Both variants share the same data pipeline: one reference solve at the
//! box center drives the reservoir once, reference solves at the Latin
//! hypercube training points run in parallel, and per-point projections are
//! one pseudoinverse application each (the feature-matrix SVD is computed a
//! single time). The reservoir is integrated in the save-grid *index*
//! coordinate, so models saved on log grids (Robertson) expose their fast
//! transients to the reservoir on the same footing as the slow tail;
//! otherwise ten decades of horizon would compress the transient into a
//! numerically invisible sliver of the reservoir trajectory.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{
    build_reservoir, simulate_reservoir, OutputNorm, Payload, ReservoirSpec, SvdSolver,
    TrainError, TrainMeta, TrainedSurrogate, Variant,
};
use crate::integrators::SolveOptions;
use crate::models::ParametrizedModel;
use crate::rbf::{fit_rbf, Kernel, RbfInterpolant, DEFAULT_RIDGE};
use crate::sampling::{latin_hypercube, ParameterSpace};
use crate::timeseries::{SplineSeries, Trajectory};

/// Training configuration shared by both variants.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Latin hypercube sample count.
    pub n_train: usize,
    /// Seeds the LHS draw; the reservoir uses `spec.seed`.
    pub seed: u64,
    /// Reference model solves.
    pub solve_opts: SolveOptions,
    /// Reservoir integration.
    pub reservoir_opts: SolveOptions,
    /// Relative singular-value truncation for the projection solves.
    pub rcond: f64,
    /// Ridge on the parameter-map RBF kernel block.
    pub ridge: f64,
    /// Shared reservoir-space centers for the NP variant.
    pub np_centers: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            n_train: 100,
            seed: 0,
            solve_opts: SolveOptions::reference(),
            reservoir_opts: SolveOptions::reservoir(),
            rcond: 1e-10,
            ridge: DEFAULT_RIDGE,
            np_centers: 32,
        }
    }
}

/// Reservoir washout ahead of the first save point, in grid-index units.
const WASHOUT_UNITS: usize = 10;

impl TrainOptions {
    /// Defaults with reference solves at the model's own tolerances.
    pub fn for_model(model: &ParametrizedModel) -> Self {
        Self { solve_opts: model.reference_solve_opts(), ..Default::default() }
    }
}

/// Train a linear-projection surrogate: per training point a minimum-norm
/// least-squares matrix `W_out`, interpolated over parameters by an RBF on
/// its row-major vectorization.
pub fn train_lpctesn(
    model: &ParametrizedModel,
    space: &ParameterSpace,
    spec: &ReservoirSpec,
    opts: &TrainOptions,
) -> Result<TrainedSurrogate, TrainError> {
    train(model, space, spec, opts, Variant::Lp)
}

/// Train a nonlinear-projection surrogate: per training point an RBF from
/// reservoir states to outputs over a fixed shared center set; the stacked
/// weight matrices are interpolated over parameters.
pub fn train_npctesn(
    model: &ParametrizedModel,
    space: &ParameterSpace,
    spec: &ReservoirSpec,
    opts: &TrainOptions,
) -> Result<TrainedSurrogate, TrainError> {
    train(model, space, spec, opts, Variant::Np)
}

fn train(
    model: &ParametrizedModel,
    space: &ParameterSpace,
    spec: &ReservoirSpec,
    opts: &TrainOptions,
    variant: Variant,
) -> Result<TrainedSurrogate, TrainError> {
    let d = space.dim();
    if opts.n_train < d + 2 {
        return Err(TrainError::TooFewSamples { got: opts.n_train, need: d + 2, dim: d });
    }
    spec.validate()?;
    let grid = &model.save_grid;
    let n_save = grid.len();
    if n_save < 4 {
        return Err(TrainError::InvalidInput("save grid needs at least 4 points".into()));
    }

    // (1) reference solve at the box center and output normalization
    let p_star = space.center();
    let ref_traj = model
        .solve(&p_star, &opts.solve_opts)
        .map_err(|e| TrainError::TrainingDiverged { index: 0, params: p_star.clone(), source: e })?;
    let out_norm = OutputNorm::from_trajectory(&ref_traj);
    let ref_norm = out_norm.normalize(ref_traj.values());

    // (2) reservoir driven by the normalized reference in index coordinate.
    // A washout segment ahead of the first save point (driver clamped to its
    // initial value) puts the reservoir on the driven trajectory before
    // sampling starts; with r0 = 0 exactly at the grid start the first
    // feature row would be identically zero and unprojectable.
    let driver = index_spline(&ref_norm)?;
    let mats = build_reservoir(spec, model.n_outputs())?;
    let s_grid: Vec<f64> = (0..n_save).map(|i| i as f64).collect();
    let r_traj = simulate_reservoir(
        &mats,
        &driver,
        spec,
        (-(WASHOUT_UNITS as f64), (n_save - 1) as f64),
        &s_grid,
        &opts.reservoir_opts,
    )?;
    let r_values = r_traj.values().clone();

    // (3) reference solves over the training design, in parallel
    let points = latin_hypercube(space, opts.n_train, opts.seed);
    let solves: Result<Vec<DMatrix<f64>>, TrainError> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            model
                .solve(p, &opts.solve_opts)
                .map(|traj| out_norm.normalize(traj.values()))
                .map_err(|e| TrainError::TrainingDiverged { index: i, params: p.clone(), source: e })
        })
        .collect();
    let targets = solves?;

    // (4) per-point projections from one shared pseudoinverse
    let payload = match variant {
        Variant::Lp => {
            let solver = SvdSolver::new(&r_values, opts.rcond)?;
            let n_out = model.n_outputs();
            let n_r = spec.n_r;
            let mut rows = DMatrix::zeros(opts.n_train, n_out * n_r);
            for (i, x) in targets.iter().enumerate() {
                let w_t = solver.solve(x); // n_r x n_out = W_out^T
                for o in 0..n_out {
                    for f in 0..n_r {
                        rows[(i, o * n_r + f)] = w_t[(f, o)];
                    }
                }
            }
            let x_mat = DMatrix::from_fn(opts.n_train, d, |i, j| points[i][j]);
            let map = fit_rbf(&x_mat, &rows, Kernel::ThinPlate, opts.ridge)?;
            Payload::Lp { map }
        }
        Variant::Np => {
            let (centers, lo, width) = select_shared_centers(&r_values, opts.np_centers)?;
            let phi = np_feature_matrix(&r_values, &centers, &lo, &width);
            let solver = SvdSolver::new(&phi, opts.rcond)?;
            let n_out = model.n_outputs();
            let nf = phi.ncols();
            let mut rows = DMatrix::zeros(opts.n_train, nf * n_out);
            for (i, x) in targets.iter().enumerate() {
                let beta = solver.solve(x); // nf x n_out
                for f in 0..nf {
                    for o in 0..n_out {
                        rows[(i, f * n_out + o)] = beta[(f, o)];
                    }
                }
            }
            let x_mat = DMatrix::from_fn(opts.n_train, d, |i, j| points[i][j]);
            let map = fit_rbf(&x_mat, &rows, Kernel::ThinPlate, opts.ridge)?;
            Payload::Np { map, centers, r_norm_lo: lo, r_norm_width: width }
        }
    };

    let mut surr = TrainedSurrogate::from_parts(
        spec.clone(),
        p_star,
        space.clone(),
        model.output_labels.clone(),
        out_norm,
        grid.clone(),
        r_values,
        payload,
        TrainMeta {
            n_train: opts.n_train,
            seed: opts.seed,
            rcond: opts.rcond,
            ridge: opts.ridge,
            np_centers: match variant {
                Variant::Np => opts.np_centers,
                Variant::Lp => 0,
            },
            train_self_error_pct: 0.0,
        },
    );

    // (5) self-consistency: reconstruct every training point
    let mut worst = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        let pred = surr.predict(p, grid)?;
        let err = mean_rel_error(pred.trajectory.values(), &targets[i], &surr.out_norm);
        worst = worst.max(err);
    }
    surr.train_meta.train_self_error_pct = worst * 100.0;
    Ok(surr)
}

/// Mean over grid and outputs of |pred - truth| / sup|truth|, with truth
/// given in normalized coordinates.
fn mean_rel_error(pred_physical: &DMatrix<f64>, truth_norm: &DMatrix<f64>, norm: &OutputNorm) -> f64 {
    let n = pred_physical.nrows();
    let nv = pred_physical.ncols();
    let mut acc = 0.0;
    for v in 0..nv {
        let mut scale = 0.0f64;
        for j in 0..n {
            let t = norm.center[v] + truth_norm[(j, v)] * norm.halfwidth[v];
            scale = scale.max(t.abs());
        }
        if scale == 0.0 {
            scale = 1.0;
        }
        for j in 0..n {
            let t = norm.center[v] + truth_norm[(j, v)] * norm.halfwidth[v];
            acc += (pred_physical[(j, v)] - t).abs() / scale;
        }
    }
    acc / (n * nv) as f64
}

/// Cubic spline over the save-grid index coordinate (knots 0..n-1).
fn index_spline(values_norm: &DMatrix<f64>) -> Result<SplineSeries, TrainError> {
    let n = values_norm.nrows();
    let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let labels = (0..values_norm.ncols()).map(|v| format!("u{v}")).collect();
    let traj = Trajectory::new(times, values_norm.clone(), labels)?;
    Ok(traj.to_spline()?)
}

/// Farthest-point sampling of shared NP centers from the normalized
/// reservoir trajectory states.
pub(super) fn select_shared_centers(
    r_values: &DMatrix<f64>,
    k: usize,
) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>), TrainError> {
    let n = r_values.nrows();
    let n_r = r_values.ncols();
    if k < 2 {
        return Err(TrainError::CenterSelectionFailed("need at least 2 centers".into()));
    }
    if n < k {
        return Err(TrainError::CenterSelectionFailed(format!(
            "save grid has {n} states, cannot select {k} centers"
        )));
    }
    let mut lo = vec![f64::INFINITY; n_r];
    let mut hi = vec![f64::NEG_INFINITY; n_r];
    for i in 0..n {
        for j in 0..n_r {
            lo[j] = lo[j].min(r_values[(i, j)]);
            hi[j] = hi[j].max(r_values[(i, j)]);
        }
    }
    let width: Vec<f64> = (0..n_r)
        .map(|j| {
            let w = hi[j] - lo[j];
            if w > 0.0 {
                w
            } else {
                1.0
            }
        })
        .collect();
    let norm_row = |i: usize, j: usize| (r_values[(i, j)] - lo[j]) / width[j];

    let mut selected = vec![0usize]; // start from the first grid state
    let mut min_d2 = vec![f64::INFINITY; n];
    loop {
        let last = *selected.last().unwrap();
        for i in 0..n {
            let mut d2 = 0.0;
            for j in 0..n_r {
                let diff = norm_row(i, j) - norm_row(last, j);
                d2 += diff * diff;
            }
            min_d2[i] = min_d2[i].min(d2);
        }
        if selected.len() == k {
            break;
        }
        let (best, &best_d2) = min_d2
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if best_d2 <= 0.0 {
            return Err(TrainError::CenterSelectionFailed(format!(
                "only {} distinct reservoir states available",
                selected.len()
            )));
        }
        selected.push(best);
        min_d2[best] = 0.0;
    }
    let centers = DMatrix::from_fn(k, n_r, |c, j| norm_row(selected[c], j));
    Ok((centers, lo, width))
}

/// NP feature matrix: thin-plate kernel against the shared centers plus the
/// degree-1 tail, rows indexed by save-grid states.
pub(super) fn np_feature_matrix(
    r_values: &DMatrix<f64>,
    centers: &DMatrix<f64>,
    lo: &[f64],
    width: &[f64],
) -> DMatrix<f64> {
    let n = r_values.nrows();
    let n_r = r_values.ncols();
    let k = centers.nrows();
    let kernel = Kernel::ThinPlate;
    let mut phi = DMatrix::zeros(n, k + n_r + 1);
    for i in 0..n {
        for c in 0..k {
            let mut d2 = 0.0;
            for j in 0..n_r {
                let u = (r_values[(i, j)] - lo[j]) / width[j];
                let diff = u - centers[(c, j)];
                d2 += diff * diff;
            }
            phi[(i, c)] = kernel.phi_sq(d2);
        }
        for j in 0..n_r {
            phi[(i, k + j)] = (r_values[(i, j)] - lo[j]) / width[j];
        }
        phi[(i, k + n_r)] = 1.0;
    }
    phi
}

/// NP feature row for a single (physical-coordinate) reservoir state.
pub(super) fn np_feature_row(
    r: &[f64],
    centers: &DMatrix<f64>,
    lo: &[f64],
    width: &[f64],
    out: &mut [f64],
) {
    let n_r = r.len();
    let k = centers.nrows();
    let kernel = Kernel::ThinPlate;
    for c in 0..k {
        let mut d2 = 0.0;
        for j in 0..n_r {
            let u = (r[j] - lo[j]) / width[j];
            let diff = u - centers[(c, j)];
            d2 += diff * diff;
        }
        out[c] = kernel.phi_sq(d2);
    }
    for j in 0..n_r {
        out[k + j] = (r[j] - lo[j]) / width[j];
    }
    out[k + n_r] = 1.0;
}

/// Convenience: map parameter-map output back to the projection matrix used
/// by prediction: `n_feat x n_out`.
pub(super) fn payload_matrix(payload: &Payload, mapped: &[f64], n_out: usize) -> DMatrix<f64> {
    match payload {
        Payload::Lp { .. } => {
            // mapped is vec(W_out) row-major with W_out n_out x n_r
            let n_r = mapped.len() / n_out;
            DMatrix::from_fn(n_r, n_out, |f, o| mapped[o * n_r + f])
        }
        Payload::Np { .. } => {
            // mapped is vec(beta) row-major with beta n_feat x n_out
            let nf = mapped.len() / n_out;
            DMatrix::from_fn(nf, n_out, |f, o| mapped[f * n_out + o])
        }
    }
}

/// The RBF parameter map of either payload.
pub(super) fn payload_map(payload: &Payload) -> &RbfInterpolant {
    match payload {
        Payload::Lp { map } => map,
        Payload::Np { map, .. } => map,
    }
}
