//! Dormand–Prince 5(4) explicit stepper with FSAL and PI step control.

use super::{all_finite, error_norm, initial_step, IntegrateError, OdeProblem, PiController, SaveCollector, SolveOptions};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// 5th-order solution weights (used to advance)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// 4th-order embedded weights
const BH1: f64 = 5179.0 / 57600.0;
const BH3: f64 = 7571.0 / 16695.0;
const BH4: f64 = 393.0 / 640.0;
const BH5: f64 = -92097.0 / 339200.0;
const BH6: f64 = 187.0 / 2100.0;
const BH7: f64 = 1.0 / 40.0;

const E1: f64 = B1 - BH1;
const E3: f64 = B3 - BH3;
const E4: f64 = B4 - BH4;
const E5: f64 = B5 - BH5;
const E6: f64 = B6 - BH6;
const E7: f64 = -BH7;

pub(super) fn integrate(
    problem: &OdeProblem,
    opts: &SolveOptions,
) -> Result<crate::timeseries::Trajectory, IntegrateError> {
    let n = problem.dimension;
    let (t0, tf) = problem.tspan;
    let rhs = |y: &[f64], t: f64, out: &mut [f64]| (problem.rhs)(y, &problem.p, t, out);

    let mut t = t0;
    let mut y = problem.initial_state.clone();
    let mut k1 = vec![0.0; n];
    rhs(&y, t, &mut k1);
    if !all_finite(&k1) {
        return Err(IntegrateError::NonFiniteState { t });
    }

    let mut h = initial_step(&y, &k1, problem.tspan, opts.abstol, opts.reltol);
    let mut controller = PiController::new(5);
    let mut collector = SaveCollector::new(opts, t0, &y);

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y_tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut steps = 0usize;
    while t < tf {
        if steps >= opts.max_steps {
            return Err(IntegrateError::StepLimitExceeded { steps, t });
        }
        steps += 1;

        let last = t + h >= tf;
        if last {
            h = tf - t;
        }

        for i in 0..n {
            y_tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(&y_tmp, t + 0.2 * h, &mut k2);
        for i in 0..n {
            y_tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(&y_tmp, t + 0.3 * h, &mut k3);
        for i in 0..n {
            y_tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(&y_tmp, t + 0.8 * h, &mut k4);
        for i in 0..n {
            y_tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(&y_tmp, t + 8.0 / 9.0 * h, &mut k5);
        for i in 0..n {
            y_tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(&y_tmp, t + h, &mut k6);

        for i in 0..n {
            y_new[i] = y[i]
                + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(&y_new, t + h, &mut k7); // FSAL

        for i in 0..n {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let errn = error_norm(&err, &y, &y_new, opts.abstol, opts.reltol);
        if !errn.is_finite() || !all_finite(&y_new) {
            return Err(IntegrateError::NonFiniteState { t: t + h });
        }

        if errn <= 1.0 {
            let t1 = if last { tf } else { t + h };
            collector.accept(t, &y, &k1, t1, &y_new, &k7);
            t = t1;
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&k7);
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
