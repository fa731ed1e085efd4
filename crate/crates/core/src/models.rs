//! Built-in parametrized benchmark models and the model interface consumed
//! by trainers, the optimizer, and co-simulation.
//!
//! Two families ship with the crate: the Robertson chemical kinetics
//! benchmark (a canonical stiff problem with reaction rates spanning nine
//! orders of magnitude) and a desk-scale room/HVAC model pair whose fast
//! actuator lag against a slow thermal zone makes it genuinely stiff.

use std::sync::Arc;

use crate::integrators::{solve_stiff, IntegrateError, OdeProblem, SolveOptions};
use crate::sampling::{ParameterSpace, Scale};
use crate::timeseries::{ErrorGrid, Trajectory};

type DynFn = Box<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
type InitFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A parametrized explicit ODE model with named outputs.
///
/// The parameter vector passed to `rhs`/`outputs`/`initial_state` is the
/// design parameters followed by the co-simulation inputs (when any); the
/// last `input_names.len()` entries are inputs held constant over a step.
pub struct ParametrizedModel {
    pub name: String,
    pub state_dim: usize,
    /// Box over the full parameter vector (design params + inputs).
    pub param_space: ParameterSpace,
    /// Names of trailing parameter entries that act as held inputs.
    pub input_names: Vec<String>,
    pub output_labels: Vec<String>,
    pub tspan: (f64, f64),
    pub save_grid: Vec<f64>,
    /// Time grid convention for error evaluation against this model.
    pub error_grid: ErrorGrid,
    /// (abstol, reltol) for reference solves of this model. Scaled to the
    /// smallest state magnitudes that matter: Robertson's y2 peaks at
    /// 3.6e-5, so the generic defaults would leave percent-level noise in
    /// its tail and the reference data would no longer dominate the
    /// surrogate error budget.
    pub reference_tolerances: (f64, f64),
    pub(crate) init: InitFn,
    pub(crate) rhs: DynFn,
    pub(crate) outputs: DynFn,
}

impl ParametrizedModel {
    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }

    pub fn initial_state(&self, p: &[f64]) -> Vec<f64> {
        (self.init)(p)
    }

    pub fn rhs(&self, u: &[f64], p: &[f64], t: f64, du: &mut [f64]) {
        (self.rhs)(u, p, t, du);
    }

    pub fn outputs_at(&self, u: &[f64], p: &[f64], t: f64, out: &mut [f64]) {
        (self.outputs)(u, p, t, out);
    }

    /// Default parameter point: the box center.
    pub fn default_params(&self) -> Vec<f64> {
        self.param_space.center()
    }

    /// Reference solve options at this model's tolerances.
    pub fn reference_solve_opts(&self) -> SolveOptions {
        SolveOptions::reference()
            .with_tolerances(self.reference_tolerances.0, self.reference_tolerances.1)
    }

    /// Solve the model states at `p` over `tspan` on `saveat` (defaults to
    /// the model's save grid) with the stiff reference integrator.
    pub fn solve_states(
        &self,
        p: &[f64],
        tspan: (f64, f64),
        saveat: Option<&[f64]>,
        opts: &SolveOptions,
    ) -> Result<Trajectory, IntegrateError> {
        let problem = OdeProblem::new(
            &*self.rhs,
            self.state_dim,
            tspan,
            p.to_vec(),
            (self.init)(p),
        );
        let mut o = opts.clone();
        o.saveat = Some(saveat.unwrap_or(&self.save_grid).to_vec());
        solve_stiff(&problem, &o)
    }

    /// Solve and map states to the model's labeled outputs.
    pub fn solve(&self, p: &[f64], opts: &SolveOptions) -> Result<Trajectory, IntegrateError> {
        self.solve_on(p, self.tspan, &self.save_grid, opts)
    }

    /// Solve outputs over an explicit span and save grid.
    pub fn solve_on(
        &self,
        p: &[f64],
        tspan: (f64, f64),
        saveat: &[f64],
        opts: &SolveOptions,
    ) -> Result<Trajectory, IntegrateError> {
        let states = self.solve_states(p, tspan, Some(saveat), opts)?;
        let n = states.len();
        let n_out = self.n_outputs();
        let mut flat = Vec::with_capacity(n * n_out);
        let mut row = vec![0.0; n_out];
        for i in 0..n {
            let u = states.row(i);
            (self.outputs)(&u, p, states.times()[i], &mut row);
            flat.extend_from_slice(&row);
        }
        let traj = Trajectory::from_flat(states.times().to_vec(), flat, n, n_out)
            .map_err(|e| IntegrateError::InvalidInput(e.to_string()))?
            .with_labels(self.output_labels.clone())
            .map_err(|e| IntegrateError::InvalidInput(e.to_string()))?;
        Ok(traj)
    }
}

/// Look up a built-in model by its CLI name.
pub fn by_name(name: &str) -> Option<ParametrizedModel> {
    match name {
        "robertson" => Some(robertson()),
        "toy_hvac" => Some(toy_hvac()),
        "toy_hvac_room" => Some(split_toy_hvac().0),
        "toy_hvac_unit" => Some(split_toy_hvac().1),
        _ => None,
    }
}

/// Names accepted by [`by_name`].
pub const MODEL_NAMES: [&str; 4] = ["robertson", "toy_hvac", "toy_hvac_room", "toy_hvac_unit"];

// ---------------------------------------------------------------------------
// Robertson chemical kinetics
// ---------------------------------------------------------------------------

/// Robertson save grid: t = 0 plus 199 log-spaced points over [1e-5, 1e5].
pub fn robertson_save_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(200);
    grid.push(0.0);
    for k in 0..199 {
        grid.push(10f64.powf(-5.0 + 10.0 * k as f64 / 198.0));
    }
    grid
}

/// The Robertson problem with the three reaction rates as parameters.
pub fn robertson() -> ParametrizedModel {
    let param_space = ParameterSpace::new(
        vec!["k1".into(), "k2".into(), "k3".into()],
        vec![0.036, 2.7e7, 0.9e4],
        vec![0.044, 3.3e7, 1.1e4],
        vec![Scale::Linear; 3],
    )
    .expect("static space");
    ParametrizedModel {
        name: "robertson".into(),
        state_dim: 3,
        param_space,
        input_names: vec![],
        output_labels: vec!["y1".into(), "y2".into(), "y3".into()],
        tspan: (0.0, 1e5),
        save_grid: robertson_save_grid(),
        error_grid: ErrorGrid::log_uniform(1000, 1e-5, 1e5),
        reference_tolerances: (1e-12, 1e-9),
        init: Box::new(|_p| vec![1.0, 0.0, 0.0]),
        rhs: Box::new(|y, p, _t, dy| {
            let (k1, k2, k3) = (p[0], p[1], p[2]);
            dy[0] = -k1 * y[0] + k3 * y[1] * y[2];
            dy[1] = k1 * y[0] - k3 * y[1] * y[2] - k2 * y[1] * y[1];
            dy[2] = k2 * y[1] * y[1];
        }),
        outputs: Box::new(|y, _p, _t, out| out.copy_from_slice(y)),
    }
}

// ---------------------------------------------------------------------------
// Toy room/HVAC model
// ---------------------------------------------------------------------------

/// Fixed constants of the room/HVAC model.
pub mod hvac {
    /// Room thermal capacitance, J/K.
    pub const C_R: f64 = 1e6;
    /// Envelope conductance, W/K.
    pub const UA: f64 = 50.0;
    /// Equipment time constant, s.
    pub const TAU: f64 = 2.0;
    /// Cooling gain at reference fan speed, W/rpm.
    pub const KAPPA: f64 = 20.0;
    /// Shaft-power gain, W/rpm.
    pub const C0: f64 = 6.0;
    /// Shaft-power temperature sensitivity, 1/K.
    pub const ALPHA: f64 = 0.02;
    /// Reference fan speed, rpm.
    pub const FAN_REF: f64 = 300.0;
    /// One day, s.
    pub const DAY: f64 = 86400.0;

    /// Diurnal ambient temperature, K.
    pub fn t_amb(t: f64) -> f64 {
        300.0 + 5.0 * (2.0 * std::f64::consts::PI * t / DAY).sin()
    }

    /// Internal heat gain from the convective gain fraction, W.
    pub fn q_int(g: f64) -> f64 {
        200.0 + 1000.0 * g
    }

    /// Compressor shaft power, W.
    pub fn csp(omega: f64, t_amb: f64, t_r: f64) -> f64 {
        C0 * omega * (1.0 + ALPHA * (t_amb - t_r))
    }
}

/// Monolithic room + HVAC model.
///
/// States `(T_r, Q_c)`; parameters compressor speed, indoor fan speed and
/// convective gain fraction; outputs `(T_r, Q_c, CSP, COP)`.
pub fn toy_hvac() -> ParametrizedModel {
    use hvac::*;
    let param_space = ParameterSpace::new(
        vec!["omega".into(), "fan".into(), "g".into()],
        vec![45.0, 270.0, 0.0],
        vec![55.0, 330.0, 0.1],
        vec![Scale::Linear; 3],
    )
    .expect("static space");
    let save_grid: Vec<f64> = (0..200).map(|i| DAY * i as f64 / 199.0).collect();
    ParametrizedModel {
        name: "toy_hvac".into(),
        state_dim: 2,
        param_space,
        input_names: vec![],
        output_labels: vec!["T_r".into(), "Q_c".into(), "CSP".into(), "COP".into()],
        tspan: (0.0, DAY),
        save_grid,
        error_grid: ErrorGrid::uniform(1000),
        reference_tolerances: (1e-8, 1e-6),
        init: Box::new(|_p| vec![300.0, 0.0]),
        rhs: Box::new(|u, p, t, du| {
            let (t_r, q_c) = (u[0], u[1]);
            let (omega, fan, g) = (p[0], p[1], p[2]);
            du[0] = (q_int(g) + UA * (t_amb(t) - t_r) - q_c) / C_R;
            du[1] = (KAPPA * omega * (fan / FAN_REF) - q_c) / TAU;
        }),
        outputs: Box::new(|u, p, t, out| {
            let (t_r, q_c) = (u[0], u[1]);
            let omega = p[0];
            let csp = csp(omega, t_amb(t), t_r);
            out[0] = t_r;
            out[1] = q_c;
            out[2] = csp;
            out[3] = q_c / csp.max(0.01);
        }),
    }
}

/// The two-unit split of [`toy_hvac`]: a room unit (state `T_r`, input
/// `Q_c`) and an HVAC unit (state `Q_c`, input `T_r`). Composing them with
/// instantaneous coupling reproduces the monolithic model exactly.
pub fn split_toy_hvac() -> (ParametrizedModel, ParametrizedModel) {
    use hvac::*;
    let room_space = ParameterSpace::new(
        vec!["g".into(), "Q_c".into()],
        vec![0.0, 0.0],
        vec![0.1, 1500.0],
        vec![Scale::Linear; 2],
    )
    .expect("static space");
    let unit_space = ParameterSpace::new(
        vec!["omega".into(), "fan".into(), "T_r".into()],
        vec![45.0, 270.0, 280.0],
        vec![55.0, 330.0, 310.0],
        vec![Scale::Linear; 3],
    )
    .expect("static space");
    let save_grid: Vec<f64> = (0..200).map(|i| DAY * i as f64 / 199.0).collect();

    let room = ParametrizedModel {
        name: "toy_hvac_room".into(),
        state_dim: 1,
        param_space: room_space,
        input_names: vec!["Q_c".into()],
        output_labels: vec!["T_r".into()],
        tspan: (0.0, DAY),
        save_grid: save_grid.clone(),
        error_grid: ErrorGrid::uniform(1000),
        reference_tolerances: (1e-8, 1e-6),
        init: Box::new(|_p| vec![300.0]),
        rhs: Box::new(|u, p, t, du| {
            let (g, q_c_in) = (p[0], p[1]);
            du[0] = (q_int(g) + UA * (t_amb(t) - u[0]) - q_c_in) / C_R;
        }),
        outputs: Box::new(|u, _p, _t, out| out[0] = u[0]),
    };

    let unit = ParametrizedModel {
        name: "toy_hvac_unit".into(),
        state_dim: 1,
        param_space: unit_space,
        input_names: vec!["T_r".into()],
        output_labels: vec!["Q_c".into(), "CSP".into()],
        tspan: (0.0, DAY),
        save_grid,
        error_grid: ErrorGrid::uniform(1000),
        reference_tolerances: (1e-8, 1e-6),
        init: Box::new(|_p| vec![0.0]),
        rhs: Box::new(|u, p, _t, du| {
            let (omega, fan) = (p[0], p[1]);
            du[0] = (KAPPA * omega * (fan / FAN_REF) - u[0]) / TAU;
        }),
        outputs: Box::new(|u, p, t, out| {
            let (omega, t_r_in) = (p[0], p[2]);
            out[0] = u[0];
            out[1] = csp(omega, t_amb(t), t_r_in);
        }),
    };

    (room, unit)
}

/// Restrict a model to a subset of free parameters with the rest pinned,
/// optionally overriding the span and save grid. Used to train surrogates of
/// co-simulation units over their observed input boxes.
pub fn restrict_model(
    base: ParametrizedModel,
    free_indices: Vec<usize>,
    pinned: Vec<f64>,
    space: ParameterSpace,
    tspan: (f64, f64),
    save_grid: Vec<f64>,
) -> ParametrizedModel {
    assert_eq!(space.dim(), free_indices.len());
    assert_eq!(pinned.len(), base.param_space.dim());
    let base = Arc::new(base);
    let expand = move |pr: &[f64], pinned: &[f64], free: &[usize]| -> Vec<f64> {
        let mut full = pinned.to_vec();
        for (i, &k) in free.iter().enumerate() {
            full[k] = pr[i];
        }
        full
    };
    let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
    let (f1, f2, f3) = (free_indices.clone(), free_indices.clone(), free_indices);
    let (p1, p2, p3) = (pinned.clone(), pinned.clone(), pinned);
    let ex1 = expand;
    ParametrizedModel {
        name: format!("{}@restricted", base.name),
        state_dim: base.state_dim,
        param_space: space,
        input_names: vec![],
        output_labels: base.output_labels.clone(),
        tspan,
        save_grid,
        error_grid: base.error_grid.clone(),
        reference_tolerances: base.reference_tolerances,
        init: Box::new(move |pr| b1.initial_state(&ex1(pr, &p1, &f1))),
        rhs: Box::new(move |u, pr, t, du| b2.rhs(u, &ex1(pr, &p2, &f2), t, du)),
        outputs: Box::new(move |u, pr, t, out| b3.outputs_at(u, &ex1(pr, &p3, &f3), t, out)),
    }
}
