//! L-stable Rosenbrock 2(3) stepper (the `ode23s` scheme of Shampine &
//! Reichelt) with finite-difference Jacobians by default.

use nalgebra::{DMatrix, DVector};

use super::{
    all_finite, error_norm, initial_step, IntegrateError, JacobianMode, OdeProblem, PiController,
    SaveCollector, SolveOptions,
};

const SQRT_EPS: f64 = 1.4901161193847656e-8; // sqrt(f64::EPSILON)

pub(super) fn integrate(
    problem: &OdeProblem,
    opts: &SolveOptions,
) -> Result<crate::timeseries::Trajectory, IntegrateError> {
    let n = problem.dimension;
    let (t0, tf) = problem.tspan;
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;

    let rhs = |y: &[f64], t: f64, out: &mut [f64]| (problem.rhs)(y, &problem.p, t, out);

    let mut t = t0;
    let mut y = problem.initial_state.clone();
    let mut f0 = vec![0.0; n];
    rhs(&y, t, &mut f0);
    if !all_finite(&f0) {
        return Err(IntegrateError::NonFiniteState { t });
    }

    let mut h = initial_step(&y, &f0, problem.tspan, opts.abstol, opts.reltol);
    let mut controller = PiController::new(3);
    let mut collector = SaveCollector::new(opts, t0, &y);

    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut ft = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut work2 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut steps = 0usize;
    let mut lu_failures = 0usize;

    while t < tf {
        if steps >= opts.max_steps {
            return Err(IntegrateError::StepLimitExceeded { steps, t });
        }
        steps += 1;

        let last = t + h >= tf;
        if last {
            h = tf - t;
        }

        // Jacobian d(rhs)/dy and time derivative d(rhs)/dt at (t, y)
        match opts.jacobian_mode {
            JacobianMode::UserSupplied => {
                let jfn = problem.jacobian.ok_or_else(|| {
                    IntegrateError::InvalidInput(
                        "jacobian_mode is user-supplied but problem has no jacobian".into(),
                    )
                })?;
                let mut flat = vec![0.0; n * n];
                jfn(&y, &problem.p, t, &mut flat);
                for i in 0..n {
                    for j in 0..n {
                        jac[(i, j)] = flat[i * n + j];
                    }
                }
            }
            JacobianMode::FiniteDifference => {
                for j in 0..n {
                    let yj = y[j];
                    let delta = SQRT_EPS * yj.abs().max(SQRT_EPS);
                    y[j] = yj + delta;
                    rhs(&y, t, &mut work);
                    y[j] = yj;
                    for i in 0..n {
                        jac[(i, j)] = (work[i] - f0[i]) / delta;
                    }
                }
            }
        }
        let dt_time = SQRT_EPS * t.abs().max(h.abs());
        rhs(&y, t + dt_time, &mut work);
        for i in 0..n {
            ft[i] = (work[i] - f0[i]) / dt_time;
        }

        // W = I - h d J
        let mut w = &jac * (-h * d);
        for i in 0..n {
            w[(i, i)] += 1.0;
        }
        let lu = w.lu();
        // Singular W: retry with a reduced step before giving up.
        let solve = |rhs_vec: &[f64]| -> Option<DVector<f64>> {
            lu.solve(&DVector::from_column_slice(rhs_vec))
        };

        for i in 0..n {
            work2[i] = f0[i] + h * d * ft[i];
        }
        let k1 = match solve(&work2) {
            Some(v) => v,
            None => {
                lu_failures += 1;
                if lu_failures > 10 {
                    return Err(IntegrateError::SingularJacobian { t, retries: lu_failures });
                }
                h *= 0.5;
                continue;
            }
        };
        lu_failures = 0;

        for i in 0..n {
            y_stage[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(&y_stage, t + 0.5 * h, &mut f1);

        for i in 0..n {
            work2[i] = f1[i] - k1[i];
        }
        let mut k2 = match solve(&work2) {
            Some(v) => v,
            None => return Err(IntegrateError::SingularJacobian { t, retries: 0 }),
        };
        for i in 0..n {
            k2[i] += k1[i];
        }

        for i in 0..n {
            y_new[i] = y[i] + h * k2[i];
        }
        if !all_finite(&y_new) {
            // halve and retry rather than aborting: transient overflow
            h *= 0.5;
            if h.abs() < f64::EPSILON * t.abs().max(1.0) {
                return Err(IntegrateError::NonFiniteState { t });
            }
            continue;
        }
        rhs(&y_new, t + h, &mut f2);

        for i in 0..n {
            work2[i] = f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]) + h * d * ft[i];
        }
        let k3 = match solve(&work2) {
            Some(v) => v,
            None => return Err(IntegrateError::SingularJacobian { t, retries: 0 }),
        };

        for i in 0..n {
            err[i] = h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i]);
        }
        let errn = error_norm(&err, &y, &y_new, opts.abstol, opts.reltol);
        if !errn.is_finite() {
            return Err(IntegrateError::NonFiniteState { t: t + h });
        }

        if errn <= 1.0 {
            let t1 = if last { tf } else { t + h };
            collector.accept(t, &y, &f0, t1, &y_new, &f2);
            t = t1;
            y.copy_from_slice(&y_new);
            f0.copy_from_slice(&f2);
            h *= controller.factor_accept(errn);
        } else {
            h *= controller.factor_reject(errn);
        }
        if h <= 0.0 || !h.is_finite() {
            return Err(IntegrateError::NonFiniteState { t });
        }
    }

    collector.finish(&y)
}
