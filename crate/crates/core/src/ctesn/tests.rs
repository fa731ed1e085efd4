use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use super::*;
use crate::integrators::SolveOptions;
use crate::models::{self, ParametrizedModel};
use crate::sampling::ParameterSpace;
use crate::timeseries::{ErrorGrid, Trajectory};

fn constant_model() -> ParametrizedModel {
    // two-state linear decay, independent of both parameters
    ParametrizedModel {
        name: "const".into(),
        state_dim: 2,
        param_space: ParameterSpace::linear(&["a", "b"], &[0.0, 0.0], &[1.0, 1.0]).unwrap(),
        input_names: vec![],
        output_labels: vec!["u0".into(), "u1".into()],
        tspan: (0.0, 4.0),
        save_grid: (0..40).map(|i| 4.0 * i as f64 / 39.0).collect(),
        error_grid: ErrorGrid::uniform(200),
        reference_tolerances: (1e-10, 1e-8),
        init: Box::new(|_p| vec![1.0, -0.5]),
        rhs: Box::new(|u, _p, _t, du| {
            du[0] = -u[0];
            du[1] = -0.5 * u[1];
        }),
        outputs: Box::new(|u, _p, _t, out| out.copy_from_slice(u)),
    }
}

#[test]
fn reservoir_1x1_rescales_exactly() {
    let spec = ReservoirSpec {
        n_r: 1,
        density: 1.0,
        spectral_radius: 0.9,
        input_scale: 1.0,
        activation: Activation::Tanh,
        seed: 3,
    };
    let mats = build_reservoir(&spec, 2).unwrap();
    assert_eq!(mats.a.nnz(), 1);
    let v = mats.a.rows[0][0].1;
    assert_abs_diff_eq!(v.abs(), 0.9, epsilon = 1e-14);
    assert_eq!(mats.r0, vec![0.0]);
}

#[test]
fn reservoir_build_is_deterministic() {
    let spec = ReservoirSpec::with_defaults(50, 11);
    let a = build_reservoir(&spec, 3).unwrap();
    let b = build_reservoir(&spec, 3).unwrap();
    assert_eq!(a, b);
    let spec2 = ReservoirSpec { seed: 12, ..spec };
    let c = build_reservoir(&spec2, 3).unwrap();
    assert_ne!(a, c);
}

#[test]
fn reservoir_spectral_radius_vs_dense_oracle() {
    let spec = ReservoirSpec {
        n_r: 100,
        density: 0.1,
        spectral_radius: 1.0,
        input_scale: 1.0,
        activation: Activation::Tanh,
        seed: 7,
    };
    let mats = build_reservoir(&spec, 3).unwrap();
    let rho = spectral_radius_dense(&mats.a);
    assert!(
        (0.99..=1.01).contains(&rho),
        "dense-oracle spectral radius {rho} outside 1% of target"
    );
    // nonzero count within 10% of density * N_R^2
    let nnz = mats.a.nnz() as f64;
    assert!((nnz - 1000.0).abs() <= 100.0, "nnz {nnz}");
}

#[test]
fn reservoir_zero_draw_fails_after_retry() {
    let spec = ReservoirSpec {
        n_r: 1,
        density: 1e-12,
        spectral_radius: 1.0,
        input_scale: 1.0,
        activation: Activation::Tanh,
        seed: 0,
    };
    assert!(matches!(
        build_reservoir(&spec, 1),
        Err(TrainError::ZeroSpectralRadius { .. })
    ));
}

fn const_driver(n_vars: usize, value: f64, t_end: f64) -> crate::timeseries::SplineSeries {
    let times: Vec<f64> = (0..10).map(|i| t_end * i as f64 / 9.0).collect();
    let values = DMatrix::from_element(10, n_vars, value);
    let labels = (0..n_vars).map(|v| format!("u{v}")).collect();
    Trajectory::new(times, values, labels).unwrap().to_spline().unwrap()
}

#[test]
fn reservoir_zero_dynamics_stays_zero() {
    let spec = ReservoirSpec {
        n_r: 2,
        density: 1.0,
        spectral_radius: 1.0,
        input_scale: 1.0,
        activation: Activation::Identity,
        seed: 5,
    };
    let mats = ReservoirMatrices {
        a: SparseRows { n: 2, rows: vec![vec![], vec![]] },
        w_hyb: DMatrix::zeros(2, 1),
        r0: vec![0.0; 2],
        realized_rho: 0.0,
    };
    let saveat: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let traj = simulate_reservoir(
        &mats,
        &const_driver(1, 3.0, 4.0),
        &spec,
        (0.0, 4.0),
        &saveat,
        &SolveOptions::reservoir(),
    )
    .unwrap();
    for i in 0..traj.len() {
        assert_eq!(traj.values()[(i, 0)], 0.0);
        assert_eq!(traj.values()[(i, 1)], 0.0);
    }
}

#[test]
fn reservoir_integrates_constant_drive_linearly() {
    // A = 0, f = identity, driver = c: r(t) = W_hyb c t
    let spec = ReservoirSpec {
        n_r: 2,
        density: 1.0,
        spectral_radius: 1.0,
        input_scale: 1.0,
        activation: Activation::Identity,
        seed: 5,
    };
    let w = DMatrix::from_row_slice(2, 1, &[0.7, -1.3]);
    let mats = ReservoirMatrices {
        a: SparseRows { n: 2, rows: vec![vec![], vec![]] },
        w_hyb: w.clone(),
        r0: vec![0.0; 2],
        realized_rho: 0.0,
    };
    let saveat: Vec<f64> = (0..9).map(|i| i as f64 / 2.0).collect();
    let traj = simulate_reservoir(
        &mats,
        &const_driver(1, 2.0, 4.0),
        &spec,
        (0.0, 4.0),
        &saveat,
        &SolveOptions::reservoir().with_tolerances(1e-12, 1e-10),
    )
    .unwrap();
    for i in 0..traj.len() {
        let t = traj.times()[i];
        assert_abs_diff_eq!(traj.values()[(i, 0)], 0.7 * 2.0 * t, epsilon = 1e-7);
        assert_abs_diff_eq!(traj.values()[(i, 1)], -1.3 * 2.0 * t, epsilon = 1e-7);
    }
}

#[test]
fn reservoir_tanh_constant_drive_closed_form() {
    // A = 0, f = tanh, driver = c: r(t) = tanh(W_hyb c) t
    let spec = ReservoirSpec {
        n_r: 2,
        density: 1.0,
        spectral_radius: 1.0,
        input_scale: 1.0,
        activation: Activation::Tanh,
        seed: 5,
    };
    let w = DMatrix::from_row_slice(2, 1, &[0.4, -0.9]);
    let mats = ReservoirMatrices {
        a: SparseRows { n: 2, rows: vec![vec![], vec![]] },
        w_hyb: w,
        r0: vec![0.0; 2],
        realized_rho: 0.0,
    };
    let saveat: Vec<f64> = (0..9).map(|i| i as f64 / 2.0).collect();
    let traj = simulate_reservoir(
        &mats,
        &const_driver(1, 1.5, 4.0),
        &spec,
        (0.0, 4.0),
        &saveat,
        &SolveOptions::reservoir().with_tolerances(1e-12, 1e-10),
    )
    .unwrap();
    for i in 0..traj.len() {
        let t = traj.times()[i];
        assert_abs_diff_eq!(traj.values()[(i, 0)], (0.4f64 * 1.5).tanh() * t, epsilon = 1e-7);
        assert_abs_diff_eq!(traj.values()[(i, 1)], (-0.9f64 * 1.5).tanh() * t, epsilon = 1e-7);
    }
}

#[test]
fn constant_model_trains_to_constant_map() {
    let model = constant_model();
    let spec = ReservoirSpec::with_defaults(8, 21);
    let opts = TrainOptions { n_train: 12, seed: 4, ..Default::default() };
    let surr = train_lpctesn(&model, &model.param_space, &spec, &opts).unwrap();

    // predictions identical at any parameter point
    let a = surr.predict(&[0.1, 0.9], &model.save_grid).unwrap();
    let b = surr.predict(&[0.8, 0.2], &model.save_grid).unwrap();
    for i in 0..a.trajectory.len() {
        for v in 0..2 {
            assert_abs_diff_eq!(
                a.trajectory.values()[(i, v)],
                b.trajectory.values()[(i, v)],
                epsilon = 1e-7
            );
        }
    }
    // and they reproduce the reference solution within the recorded residual
    // (a mean-over-grid metric, so compare means)
    let truth = model.solve(&[0.5, 0.5], &opts.solve_opts).unwrap();
    let mut acc = 0.0f64;
    for v in 0..2 {
        let scale = truth.values().column(v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..truth.len() {
            acc += (a.trajectory.values()[(i, v)] - truth.values()[(i, v)]).abs() / scale;
        }
    }
    let err = acc / (truth.len() * 2) as f64;
    let recorded = surr.train_meta.train_self_error_pct / 100.0;
    assert!(
        err <= recorded * 1.01 + 1e-9,
        "reconstruction error {err} vs recorded residual {recorded}"
    );
}

#[test]
fn np_constant_model_betas_identical() {
    let model = constant_model();
    let spec = ReservoirSpec::with_defaults(3, 9);
    let opts = TrainOptions { n_train: 10, seed: 2, np_centers: 12, ..Default::default() };
    let surr = train_npctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let a = surr.predict(&[0.05, 0.95], &model.save_grid).unwrap();
    let b = surr.predict(&[0.95, 0.05], &model.save_grid).unwrap();
    for i in 0..a.trajectory.len() {
        for v in 0..2 {
            assert_abs_diff_eq!(
                a.trajectory.values()[(i, v)],
                b.trajectory.values()[(i, v)],
                epsilon = 1e-7
            );
        }
    }
}

#[test]
fn degenerate_space_fails_with_singular_system() {
    // a box two ulps wide: samples collapse onto <= 3 representable values
    let model = constant_model();
    let space = ParameterSpace::linear(
        &["a", "b"],
        &[1.0, 1.0],
        &[1.0 + 5e-16, 1.0 + 5e-16],
    )
    .unwrap();
    let spec = ReservoirSpec::with_defaults(4, 1);
    let opts = TrainOptions { n_train: 10, seed: 1, ..Default::default() };
    match train_lpctesn(&model, &space, &spec, &opts) {
        Err(TrainError::Rbf(crate::rbf::RbfError::SingularSystem(_, _))) => {}
        other => panic!("expected SingularSystem, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn too_few_samples_rejected() {
    let model = constant_model();
    let spec = ReservoirSpec::with_defaults(4, 1);
    let opts = TrainOptions { n_train: 3, seed: 1, ..Default::default() };
    assert!(matches!(
        train_lpctesn(&model, &model.param_space, &spec, &opts),
        Err(TrainError::TooFewSamples { .. })
    ));
}

#[test]
fn predict_variant_mismatch_rejected() {
    let model = constant_model();
    let spec = ReservoirSpec::with_defaults(4, 1);
    let opts = TrainOptions { n_train: 8, seed: 1, ..Default::default() };
    let surr = train_lpctesn(&model, &model.param_space, &spec, &opts).unwrap();
    assert!(predict_np(&surr, &[0.5, 0.5], &model.save_grid).is_err());
    assert!(predict_lp(&surr, &[0.5, 0.5], &model.save_grid).is_ok());
}

#[test]
fn predict_flags_extrapolation() {
    let model = constant_model();
    let spec = ReservoirSpec::with_defaults(4, 1);
    let opts = TrainOptions { n_train: 8, seed: 1, ..Default::default() };
    let surr = train_lpctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let inside = surr.predict(&[0.5, 0.5], &model.save_grid).unwrap();
    assert!(!inside.extrapolated);
    let outside = surr.predict(&[1.5, 0.5], &model.save_grid).unwrap();
    assert!(outside.extrapolated);
}

#[test]
fn robertson_np_smoke_accuracy() {
    // small training budget; the acceptance suite runs the full protocol
    let model = models::robertson();
    let spec = ReservoirSpec::with_defaults(3, 17);
    let opts = TrainOptions { n_train: 40, seed: 6, ..TrainOptions::for_model(&model) };
    let surr = train_npctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let report = validate_surrogate(&surr, &model, 20, &ValidateOptions::for_model(&model)).unwrap();
    assert!(
        report.avg_rel_err_pct < 2.0,
        "robertson NP smoke error {}%",
        report.avg_rel_err_pct
    );
    assert!(report.speedup > 1.0, "speedup {}", report.speedup);
    assert_eq!(report.histogram.counts.iter().sum::<usize>(), 20);
}

#[test]
fn predict_at_training_point_within_recorded_residual() {
    let model = models::robertson();
    let spec = ReservoirSpec::with_defaults(3, 17);
    let opts = TrainOptions { n_train: 20, seed: 6, ..TrainOptions::for_model(&model) };
    let surr = train_npctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let points = crate::sampling::latin_hypercube(&surr.space, 20, 6);
    let truth = model.solve(&points[7], &opts.solve_opts).unwrap();
    let pred = surr.predict(&points[7], &surr.grid_times).unwrap();
    // mean over grid and outputs with sup-norm scales: the recorded metric
    let mut acc = 0.0f64;
    for v in 0..truth.n_vars() {
        let scale = truth.values().column(v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..truth.len() {
            acc += (pred.trajectory.values()[(i, v)] - truth.values()[(i, v)]).abs() / scale;
        }
    }
    let err = acc / (truth.len() * truth.n_vars()) as f64;
    let recorded = surr.train_meta.train_self_error_pct / 100.0;
    assert!(
        err <= recorded * 1.0001 + 1e-12,
        "training-point error {err} vs recorded residual {recorded}"
    );
}

#[test]
fn prediction_never_invokes_stiff_solver() {
    let model = constant_model();
    let spec = ReservoirSpec::with_defaults(4, 1);
    let opts = TrainOptions { n_train: 8, seed: 1, ..Default::default() };
    let surr = train_lpctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let before = crate::integrators::stiff_solve_count();
    for _ in 0..5 {
        surr.predict(&[0.3, 0.3], &model.save_grid).unwrap();
        surr.predict(&[0.3, 0.3], &[0.1, 0.5, 1.7, 3.3]).unwrap();
    }
    assert_eq!(crate::integrators::stiff_solve_count(), before);
}

#[test]
fn off_grid_prediction_consistent_with_grid() {
    let model = models::robertson();
    let spec = ReservoirSpec::with_defaults(3, 17);
    let opts = TrainOptions { n_train: 20, seed: 6, ..TrainOptions::for_model(&model) };
    let surr = train_npctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let p = [0.041, 2.9e7, 1.02e4];
    let on_grid = surr.predict(&p, &surr.grid_times).unwrap();
    // sample two exact grid times through the general (off-grid) path
    let t_a = surr.grid_times[50];
    let t_b = surr.grid_times[150];
    let off = surr.predict(&p, &[t_a, t_b]).unwrap();
    for (row, idx) in [(0, 50), (1, 150)] {
        for v in 0..3 {
            assert_abs_diff_eq!(
                off.trajectory.values()[(row, v)],
                on_grid.trajectory.values()[(idx, v)],
                epsilon = 1e-10
            );
        }
    }
}

#[test]
fn training_deterministic_across_thread_counts() {
    let model = models::robertson();
    let spec = ReservoirSpec::with_defaults(3, 23);
    let opts = TrainOptions { n_train: 12, seed: 9, ..TrainOptions::for_model(&model) };
    let train_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train_npctesn(&model, &model.param_space, &spec, &opts).unwrap())
    };
    let a = train_with(1);
    let b = train_with(4);
    assert_eq!(a.r_values, b.r_values);
    assert_eq!(a.payload, b.payload);
    assert_eq!(a.train_meta, b.train_meta);
}

#[test]
fn monotone_refinement_on_robertson() {
    // doubling n_train from 25 to 50 to 100 does not increase the median
    // held-out average error over three seeds
    let model = models::robertson();
    let mut medians = Vec::new();
    for n_train in [25usize, 50, 100] {
        let mut errs = Vec::new();
        for seed in [1u64, 2, 3] {
            let spec = ReservoirSpec::with_defaults(3, seed);
            let opts = TrainOptions { n_train, seed, ..TrainOptions::for_model(&model) };
            let surr = train_npctesn(&model, &model.param_space, &spec, &opts).unwrap();
            let rep = validate_surrogate(
                &surr,
                &model,
                20,
                &ValidateOptions { n_error_points: 400, ..ValidateOptions::for_model(&model) },
            )
            .unwrap();
            errs.push(rep.avg_rel_err_pct);
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(errs[1]);
    }
    assert!(
        medians[1] <= medians[0] * 1.0001 && medians[2] <= medians[1] * 1.0001,
        "medians not non-increasing: {medians:?}"
    );
}

#[test]
fn lp_predict_speedup_on_robertson() {
    use std::time::Instant;
    let model = models::robertson();
    let spec = ReservoirSpec::with_defaults(300, 31);
    let opts = TrainOptions { n_train: 20, seed: 8, ..TrainOptions::for_model(&model) };
    let surr = train_lpctesn(&model, &model.param_space, &spec, &opts).unwrap();
    let p = model.default_params();

    let reps = 5;
    let mut solve_best = f64::INFINITY;
    for _ in 0..reps {
        let t = Instant::now();
        let _ = model.solve(&p, &model.reference_solve_opts()).unwrap();
        solve_best = solve_best.min(t.elapsed().as_secs_f64());
    }
    let mut predict_best = f64::INFINITY;
    for _ in 0..reps {
        let t = Instant::now();
        let _ = surr.predict(&p, &surr.grid_times).unwrap();
        predict_best = predict_best.min(t.elapsed().as_secs_f64());
    }
    assert!(
        predict_best * 10.0 <= solve_best,
        "predict {predict_best:.2e}s vs solve {solve_best:.2e}s"
    );
}
