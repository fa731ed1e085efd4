//! Adaptive ODE integration.
//!
//! Two solvers with embedded error estimation and PI step-size control:
//!
//! - [`solve_stiff`] — an L-stable Rosenbrock method (order 2 with a
//!   3rd-order error estimate, the `ode23s` scheme) with finite-difference
//!   or user-supplied Jacobians. Used for all reference model solves.
//! - [`solve_explicit`] — Dormand–Prince 5(4). Used for the non-stiff
//!   reservoir equation.
//!
//! Both honor `saveat` exactly via cubic Hermite dense output, and both are
//! pure functions of their inputs: two solves with identical inputs produce
//! bit-identical trajectories.

mod dopri;
mod rosenbrock;

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::timeseries::Trajectory;

/// Right-hand side signature: `rhs(state, params, t, out_derivative)`.
pub type RhsFn<'a> = &'a (dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Sync);

/// Jacobian signature: writes the row-major `n x n` matrix d(rhs)/d(state).
pub type JacFn<'a> = &'a (dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Sync);

/// A parametrized initial value problem `u' = rhs(u, p, t)`.
pub struct OdeProblem<'a> {
    pub rhs: RhsFn<'a>,
    /// Analytic Jacobian, used only when `jacobian_mode` selects it.
    pub jacobian: Option<JacFn<'a>>,
    pub dimension: usize,
    pub tspan: (f64, f64),
    pub p: Vec<f64>,
    pub initial_state: Vec<f64>,
}

impl<'a> OdeProblem<'a> {
    pub fn new(
        rhs: RhsFn<'a>,
        dimension: usize,
        tspan: (f64, f64),
        p: Vec<f64>,
        initial_state: Vec<f64>,
    ) -> Self {
        Self { rhs, jacobian: None, dimension, tspan, p, initial_state }
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        if self.tspan.1 <= self.tspan.0 {
            return Err(IntegrateError::InvalidInput(format!(
                "tspan end {} must exceed start {}",
                self.tspan.1, self.tspan.0
            )));
        }
        if self.initial_state.len() != self.dimension {
            return Err(IntegrateError::InvalidInput(format!(
                "initial state length {} != dimension {}",
                self.initial_state.len(),
                self.dimension
            )));
        }
        Ok(())
    }
}

/// How the stiff solver obtains the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    #[default]
    FiniteDifference,
    UserSupplied,
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub abstol: f64,
    pub reltol: f64,
    pub max_steps: usize,
    /// Exact output times; when `None` the accepted step points are returned.
    pub saveat: Option<Vec<f64>>,
    pub jacobian_mode: JacobianMode,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::reference()
    }
}

impl SolveOptions {
    /// Defaults for reference model solves.
    pub fn reference() -> Self {
        Self {
            abstol: 1e-8,
            reltol: 1e-6,
            max_steps: 10_000_000,
            saveat: None,
            jacobian_mode: JacobianMode::FiniteDifference,
        }
    }

    /// Looser defaults for the non-stiff reservoir equation.
    pub fn reservoir() -> Self {
        Self { abstol: 1e-6, reltol: 1e-4, ..Self::reference() }
    }

    pub fn with_saveat(mut self, saveat: Vec<f64>) -> Self {
        self.saveat = Some(saveat);
        self
    }

    pub fn with_tolerances(mut self, abstol: f64, reltol: f64) -> Self {
        self.abstol = abstol;
        self.reltol = reltol;
        self
    }

    fn validate(&self, tspan: (f64, f64)) -> Result<(), IntegrateError> {
        if !(self.abstol > 0.0) || !(self.reltol > 0.0) {
            return Err(IntegrateError::InvalidInput(
                "abstol and reltol must be positive".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(IntegrateError::InvalidInput("max_steps must be positive".into()));
        }
        if let Some(times) = &self.saveat {
            if times.len() < 2 {
                return Err(IntegrateError::InvalidInput(
                    "saveat needs at least two times".into(),
                ));
            }
            let slack = 1e-12 * (tspan.1 - tspan.0).abs();
            for w in times.windows(2) {
                if w[1] <= w[0] {
                    return Err(IntegrateError::InvalidInput(
                        "saveat times must be strictly increasing".into(),
                    ));
                }
            }
            if times[0] < tspan.0 - slack || *times.last().unwrap() > tspan.1 + slack {
                return Err(IntegrateError::InvalidInput(format!(
                    "saveat range [{}, {}] outside tspan [{}, {}]",
                    times[0],
                    times.last().unwrap(),
                    tspan.0,
                    tspan.1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("step limit exceeded after {steps} steps at t = {t}")]
    StepLimitExceeded { steps: usize, t: f64 },
    #[error("singular Jacobian: linear solve failed at t = {t} after {retries} step reductions")]
    SingularJacobian { t: f64, retries: usize },
    #[error("non-finite state produced at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
}

static STIFF_SOLVE_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of [`solve_stiff`] invocations since process start. Lets callers
/// assert that surrogate prediction paths never fall back to a full solve.
pub fn stiff_solve_count() -> u64 {
    STIFF_SOLVE_COUNT.load(Ordering::Relaxed)
}

/// Integrate a stiff problem with the L-stable Rosenbrock scheme.
pub fn solve_stiff(problem: &OdeProblem, opts: &SolveOptions) -> Result<Trajectory, IntegrateError> {
    STIFF_SOLVE_COUNT.fetch_add(1, Ordering::Relaxed);
    problem.validate()?;
    opts.validate(problem.tspan)?;
    rosenbrock::integrate(problem, opts)
}

/// Integrate a non-stiff problem with Dormand–Prince 5(4).
pub fn solve_explicit(
    problem: &OdeProblem,
    opts: &SolveOptions,
) -> Result<Trajectory, IntegrateError> {
    problem.validate()?;
    opts.validate(problem.tspan)?;
    dopri::integrate(problem, opts)
}

/// Weighted RMS error norm; accept a step when <= 1.
fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], abstol: f64, reltol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sc = abstol + reltol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / err.len() as f64).sqrt()
}

/// PI step-size controller: safety 0.9, growth factor clamped to [0.2, 5].
struct PiController {
    order: f64, // order of the error estimator (p + 1)
    prev_errn: f64,
}

impl PiController {
    fn new(estimator_order: usize) -> Self {
        Self { order: estimator_order as f64, prev_errn: 1.0 }
    }

    fn factor_accept(&mut self, errn: f64) -> f64 {
        let e = errn.max(1e-10);
        let b1 = 0.6 / self.order;
        let b2 = 0.2 / self.order;
        let fac = 0.9 * e.powf(-b1) * self.prev_errn.max(1e-10).powf(b2);
        self.prev_errn = e;
        fac.clamp(0.2, 5.0)
    }

    fn factor_reject(&self, errn: f64) -> f64 {
        let fac = 0.9 * errn.max(1e-10).powf(-1.0 / self.order);
        fac.clamp(0.2, 1.0)
    }
}

/// Heuristic initial step size from the scaled state/derivative magnitudes.
fn initial_step(y0: &[f64], f0: &[f64], tspan: (f64, f64), abstol: f64, reltol: f64) -> f64 {
    let span = tspan.1 - tspan.0;
    let n = y0.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y0.len() {
        let sc = abstol + reltol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    d0 = (d0 / n).sqrt();
    d1 = (d1 / n).sqrt();
    let h = if d0 >= 1e-5 && d1 >= 1e-5 { 0.01 * d0 / d1 } else { 1e-6 * span };
    h.min(span / 10.0).max(1e-300)
}

/// Accumulates output rows, either at every accepted step or interpolated
/// onto an exact `saveat` grid with cubic Hermite dense output.
struct SaveCollector {
    saveat: Option<Vec<f64>>,
    next: usize,
    times: Vec<f64>,
    rows: Vec<f64>,
    dim: usize,
    buf: Vec<f64>,
}

impl SaveCollector {
    fn new(opts: &SolveOptions, t0: f64, y0: &[f64]) -> Self {
        let mut c = Self {
            saveat: opts.saveat.clone(),
            next: 0,
            times: Vec::new(),
            rows: Vec::new(),
            dim: y0.len(),
            buf: vec![0.0; y0.len()],
        };
        if c.saveat.is_none() {
            c.push(t0, y0);
        } else {
            // emit any requested times at (or numerically before) t0
            while let Some(t) = c.pending() {
                if t > t0 {
                    break;
                }
                c.times.push(t);
                c.rows.extend_from_slice(y0);
                c.next += 1;
            }
        }
        c
    }

    fn pending(&self) -> Option<f64> {
        self.saveat.as_ref().and_then(|ts| ts.get(self.next).copied())
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.rows.extend_from_slice(y);
    }

    /// Record an accepted step from (t0, y0, f0) to (t1, y1, f1).
    fn accept(&mut self, t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64]) {
        if self.saveat.is_none() {
            self.push(t1, y1);
            return;
        }
        let h = t1 - t0;
        while let Some(t) = self.pending() {
            if t > t1 {
                break;
            }
            hermite(t0, y0, f0, h, y1, f1, t, &mut self.buf);
            self.times.push(t);
            let row = self.buf.clone();
            self.rows.extend_from_slice(&row);
            self.next += 1;
        }
    }

    fn finish(mut self, yf: &[f64]) -> Result<Trajectory, IntegrateError> {
        // flush requested times within roundoff beyond the final step
        while let Some(t) = self.pending() {
            self.times.push(t);
            self.rows.extend_from_slice(yf);
            self.next += 1;
        }
        let n = self.times.len();
        Trajectory::from_flat(self.times, self.rows, n, self.dim)
            .map_err(|e| IntegrateError::InvalidInput(e.to_string()))
    }
}

/// Cubic Hermite interpolation on one accepted step.
fn hermite(t0: f64, y0: &[f64], f0: &[f64], h: f64, y1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let th = (t - t0) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests;
