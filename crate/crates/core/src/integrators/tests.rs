use approx::assert_abs_diff_eq;

use super::*;

fn decay_problem(tf: f64) -> OdeProblem<'static> {
    OdeProblem::new(
        &|y: &[f64], _p: &[f64], _t: f64, dy: &mut [f64]| dy[0] = -y[0],
        1,
        (0.0, tf),
        vec![],
        vec![1.0],
    )
}

fn robertson_rhs(y: &[f64], p: &[f64], _t: f64, dy: &mut [f64]) {
    let (k1, k2, k3) = (p[0], p[1], p[2]);
    dy[0] = -k1 * y[0] + k3 * y[1] * y[2];
    dy[1] = k1 * y[0] - k3 * y[1] * y[2] - k2 * y[1] * y[1];
    dy[2] = k2 * y[1] * y[1];
}

fn robertson_problem(p: Vec<f64>, tf: f64) -> OdeProblem<'static> {
    OdeProblem::new(&robertson_rhs, 3, (0.0, tf), p, vec![1.0, 0.0, 0.0])
}

#[test]
fn stiff_linear_decay_matches_closed_form() {
    let problem = decay_problem(1.0);
    let opts = SolveOptions::reference().with_tolerances(1e-10, 1e-8);
    let traj = solve_stiff(&problem, &opts).unwrap();
    let last = traj.values()[(traj.len() - 1, 0)];
    assert_abs_diff_eq!(last, (-1.0f64).exp(), epsilon = 1e-6);
}

#[test]
fn stiff_robertson_mass_conserved() {
    let problem = robertson_problem(vec![0.04, 3e7, 1e4], 1e5);
    let traj = solve_stiff(&problem, &SolveOptions::reference()).unwrap();
    for i in 0..traj.len() {
        let sum: f64 = (0..3).map(|v| traj.values()[(i, v)]).sum();
        assert!((sum - 1.0).abs() <= 1e-6, "row {i}: sum {sum}");
    }
}

#[test]
fn stiff_robertson_against_tight_tolerance_oracle() {
    // Oracle: same integrator at reltol 1e-12, Richardson cross-checked at 1e-13.
    let problem = robertson_problem(vec![0.04, 3e7, 1e4], 40.0);
    let tight = solve_stiff(&problem, &SolveOptions::reference().with_tolerances(1e-14, 1e-12))
        .unwrap();
    let tighter = solve_stiff(&problem, &SolveOptions::reference().with_tolerances(1e-15, 1e-13))
        .unwrap();
    let y1_oracle = tight.values()[(tight.len() - 1, 0)];
    let y1_check = tighter.values()[(tighter.len() - 1, 0)];
    assert!(
        ((y1_oracle - y1_check) / y1_oracle).abs() < 1e-7,
        "oracle self-consistency: {y1_oracle} vs {y1_check}"
    );

    let run = solve_stiff(&problem, &SolveOptions::reference()).unwrap();
    let y1 = run.values()[(run.len() - 1, 0)];
    assert!(
        ((y1 - y1_oracle) / y1_oracle).abs() < 1e-5,
        "y1(40) = {y1} vs oracle {y1_oracle}"
    );
}

#[test]
fn stiff_saveat_times_exact() {
    let problem = robertson_problem(vec![0.04, 3e7, 1e4], 100.0);
    let saveat = vec![0.0, 1e-3, 0.1, 1.0, 20.0, 40.0, 100.0];
    let opts = SolveOptions::reference().with_saveat(saveat.clone());
    let traj = solve_stiff(&problem, &opts).unwrap();
    assert_eq!(traj.times(), &saveat[..]);
}

#[test]
fn stiff_step_limit_error() {
    let problem = robertson_problem(vec![0.04, 3e7, 1e4], 1e5);
    let mut opts = SolveOptions::reference();
    opts.max_steps = 10;
    assert!(matches!(
        solve_stiff(&problem, &opts),
        Err(IntegrateError::StepLimitExceeded { .. })
    ));
}

#[test]
fn stiff_nonfinite_state_detected() {
    // y' = y^2 blows up at t = 1 from y(0) = 1
    let problem = OdeProblem::new(
        &|y: &[f64], _p: &[f64], _t: f64, dy: &mut [f64]| dy[0] = y[0] * y[0],
        1,
        (0.0, 2.0),
        vec![],
        vec![1.0],
    );
    let err = solve_stiff(&problem, &SolveOptions::reference()).unwrap_err();
    assert!(matches!(
        err,
        IntegrateError::NonFiniteState { .. } | IntegrateError::StepLimitExceeded { .. }
    ));
}

#[test]
fn stiff_user_supplied_jacobian() {
    let problem = OdeProblem {
        rhs: &|y: &[f64], _p: &[f64], _t: f64, dy: &mut [f64]| dy[0] = -y[0],
        jacobian: Some(&|_y: &[f64], _p: &[f64], _t: f64, j: &mut [f64]| j[0] = -1.0),
        dimension: 1,
        tspan: (0.0, 1.0),
        p: vec![],
        initial_state: vec![1.0],
    };
    let mut opts = SolveOptions::reference().with_tolerances(1e-10, 1e-8);
    opts.jacobian_mode = JacobianMode::UserSupplied;
    let traj = solve_stiff(&problem, &opts).unwrap();
    let last = traj.values()[(traj.len() - 1, 0)];
    assert_abs_diff_eq!(last, (-1.0f64).exp(), epsilon = 1e-6);
}

#[test]
fn explicit_constant_solution_exact() {
    let problem = OdeProblem::new(
        &|_y: &[f64], _p: &[f64], _t: f64, dy: &mut [f64]| dy[0] = 0.0,
        1,
        (0.0, 5.0),
        vec![],
        vec![3.25],
    );
    let opts = SolveOptions::reference().with_saveat(vec![0.0, 1.0, 2.5, 5.0]);
    let traj = solve_explicit(&problem, &opts).unwrap();
    for i in 0..traj.len() {
        assert_eq!(traj.values()[(i, 0)], 3.25);
    }
}

#[test]
fn explicit_harmonic_oscillator_period() {
    let problem = OdeProblem::new(
        &|y: &[f64], _p: &[f64], _t: f64, dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        },
        2,
        (0.0, 2.0 * std::f64::consts::PI),
        vec![],
        vec![1.0, 0.0],
    );
    let opts = SolveOptions::reference().with_tolerances(1e-12, 1e-9);
    let traj = solve_explicit(&problem, &opts).unwrap();
    let n = traj.len() - 1;
    assert_abs_diff_eq!(traj.values()[(n, 0)], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(traj.values()[(n, 1)], 0.0, epsilon = 1e-6);
}

#[test]
fn explicit_error_shrinks_with_tolerance() {
    let max_err = |reltol: f64| -> f64 {
        let problem = decay_problem(5.0);
        let opts = SolveOptions::reference().with_tolerances(reltol * 1e-2, reltol);
        let traj = solve_explicit(&problem, &opts).unwrap();
        (0..traj.len())
            .map(|i| (traj.values()[(i, 0)] - (-traj.times()[i]).exp()).abs())
            .fold(0.0, f64::max)
    };
    let coarse = max_err(1e-6);
    let fine = max_err(1e-9);
    assert!(fine * 10.0 <= coarse, "coarse {coarse:e} vs fine {fine:e}");
}

#[test]
fn tolerance_monotonicity_linear_decay_and_oscillator() {
    let decay_err = |reltol: f64| {
        let problem = decay_problem(3.0);
        let opts = SolveOptions::reference().with_tolerances(reltol * 1e-2, reltol);
        let traj = solve_stiff(&problem, &opts).unwrap();
        (0..traj.len())
            .map(|i| (traj.values()[(i, 0)] - (-traj.times()[i]).exp()).abs())
            .fold(0.0, f64::max)
    };
    let osc_err = |reltol: f64| {
        let problem = OdeProblem::new(
            &|y: &[f64], _p: &[f64], _t: f64, dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            2,
            (0.0, 10.0),
            vec![],
            vec![1.0, 0.0],
        );
        let opts = SolveOptions::reference().with_tolerances(reltol * 1e-2, reltol);
        let traj = solve_explicit(&problem, &opts).unwrap();
        (0..traj.len())
            .map(|i| (traj.values()[(i, 0)] - traj.times()[i].cos()).abs())
            .fold(0.0, f64::max)
    };
    for errf in [decay_err as fn(f64) -> f64, osc_err as fn(f64) -> f64] {
        let e4 = errf(1e-4);
        let e6 = errf(1e-6);
        let e8 = errf(1e-8);
        assert!(e6 <= e4, "1e-6: {e6:e} vs 1e-4: {e4:e}");
        assert!(e8 <= e6, "1e-8: {e8:e} vs 1e-6: {e6:e}");
    }
}

#[test]
fn solves_are_deterministic() {
    let problem = robertson_problem(vec![0.04, 3e7, 1e4], 1e4);
    let opts = SolveOptions::reference();
    let a = solve_stiff(&problem, &opts).unwrap();
    let b = solve_stiff(&problem, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_options_rejected() {
    let problem = decay_problem(1.0);
    let mut opts = SolveOptions::reference();
    opts.abstol = -1.0;
    assert!(matches!(solve_stiff(&problem, &opts), Err(IntegrateError::InvalidInput(_))));
    let opts = SolveOptions::reference().with_saveat(vec![0.0, 2.0]); // outside tspan
    assert!(matches!(solve_stiff(&problem, &opts), Err(IntegrateError::InvalidInput(_))));
}
