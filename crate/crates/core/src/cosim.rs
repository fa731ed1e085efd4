//! Fixed-step co-simulation master: Jacobi exchange of unit outputs at
//! discrete communication points with zero-order-hold inputs in between.
//! Units are either native models with their own stiff solver or trained
//! surrogates deployed as drop-in replacements.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::ctesn::{predict_rows, TrainedSurrogate};
use crate::integrators::SolveOptions;
use crate::models::ParametrizedModel;
use crate::sampling::{ParameterSpace, Scale};
use crate::timeseries::Trajectory;

#[derive(Debug, Error)]
pub enum CosimError {
    #[error("input '{input}' of unit '{unit}' is never wired")]
    DeadlockedWiring { unit: String, input: String },
    #[error("input '{input}' of unit '{unit}' is wired more than once")]
    DuplicateWiring { unit: String, input: String },
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("unknown unit or variable name '{0}'")]
    UnknownName(String),
    #[error(transparent)]
    Integrate(#[from] crate::integrators::IntegrateError),
    #[error(transparent)]
    Train(#[from] crate::ctesn::TrainError),
    #[error(transparent)]
    Timeseries(#[from] crate::timeseries::TimeseriesError),
}

/// A steppable simulation unit: holds inputs constant over a step, exposes
/// named outputs at the current time.
pub trait SimulationUnit {
    fn name(&self) -> &str;
    fn input_names(&self) -> &[String];
    fn output_names(&self) -> &[String];
    /// Reset internal state to `t0` with the unit's design parameters.
    fn reset(&mut self, p: &[f64], t0: f64) -> Result<(), CosimError>;
    fn set_inputs(&mut self, values: &[f64]) -> Result<(), CosimError>;
    /// Advance to `to_time` holding the current inputs constant.
    fn step(&mut self, to_time: f64) -> Result<(), CosimError>;
    /// Outputs at the current time; stable between steps.
    fn get_outputs(&self) -> Vec<f64>;
    /// A surrogate unit saw inputs outside its trained box at some point.
    fn extrapolation_seen(&self) -> bool {
        false
    }
}

/// Wrap a parametrized model (with declared inputs) as a simulation unit.
/// The full parameter vector passed to the model is the design parameters
/// followed by the held inputs.
pub struct NativeUnit {
    model: ParametrizedModel,
    solve_opts: SolveOptions,
    params: Vec<f64>,
    inputs: Vec<f64>,
    state: Vec<f64>,
    t: f64,
}

/// Build a native unit around a model.
pub fn native_unit(model: ParametrizedModel) -> NativeUnit {
    let solve_opts = model.reference_solve_opts();
    let n_design = model.param_space.dim() - model.input_names.len();
    let n_inputs = model.input_names.len();
    NativeUnit {
        state: vec![],
        params: vec![0.0; n_design],
        inputs: vec![0.0; n_inputs],
        t: 0.0,
        solve_opts,
        model,
    }
}

impl NativeUnit {
    fn p_full(&self) -> Vec<f64> {
        let mut p = self.params.clone();
        p.extend_from_slice(&self.inputs);
        p
    }
}

impl SimulationUnit for NativeUnit {
    fn name(&self) -> &str {
        &self.model.name
    }

    fn input_names(&self) -> &[String] {
        &self.model.input_names
    }

    fn output_names(&self) -> &[String] {
        &self.model.output_labels
    }

    fn reset(&mut self, p: &[f64], t0: f64) -> Result<(), CosimError> {
        if p.len() != self.params.len() {
            return Err(CosimError::InvalidCoupling(format!(
                "unit '{}' expects {} design parameters, got {}",
                self.model.name,
                self.params.len(),
                p.len()
            )));
        }
        self.params.copy_from_slice(p);
        self.inputs.fill(0.0);
        self.state = self.model.initial_state(&self.p_full());
        self.t = t0;
        Ok(())
    }

    fn set_inputs(&mut self, values: &[f64]) -> Result<(), CosimError> {
        if values.len() != self.inputs.len() {
            return Err(CosimError::InvalidCoupling(format!(
                "unit '{}' expects {} inputs, got {}",
                self.model.name,
                self.inputs.len(),
                values.len()
            )));
        }
        self.inputs.copy_from_slice(values);
        Ok(())
    }

    fn step(&mut self, to_time: f64) -> Result<(), CosimError> {
        if to_time <= self.t {
            return Err(CosimError::InvalidCoupling(format!(
                "step target {to_time} not ahead of current time {}",
                self.t
            )));
        }
        let p_full = self.p_full();
        let problem = crate::integrators::OdeProblem::new(
            &*self.model.rhs,
            self.model.state_dim,
            (self.t, to_time),
            p_full,
            self.state.clone(),
        );
        let opts = self.solve_opts.clone().with_saveat(vec![self.t, to_time]);
        let traj = crate::integrators::solve_stiff(&problem, &opts)?;
        self.state = traj.row(traj.len() - 1);
        self.t = to_time;
        Ok(())
    }

    fn get_outputs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.model.n_outputs()];
        self.model.outputs_at(&self.state, &self.p_full(), self.t, &mut out);
        out
    }
}

/// Deploy a trained surrogate as a drop-in unit. The held inputs are the
/// surrogate's parameters and every communication interval runs on the
/// surrogate's own interval-local time base [0, h]; no state carries over
/// between intervals.
pub struct SurrogateUnit {
    name: String,
    surr: TrainedSurrogate,
    input_names: Vec<String>,
    inputs: Vec<f64>,
    t: f64,
    outputs: Vec<f64>,
    stepped: bool,
    extrapolated: bool,
}

pub fn surrogate_unit(
    name: impl Into<String>,
    surr: TrainedSurrogate,
    input_names: Vec<String>,
) -> Result<SurrogateUnit, CosimError> {
    if input_names.len() != surr.space.dim() {
        return Err(CosimError::InvalidCoupling(format!(
            "surrogate expects {} inputs as parameters, unit declares {}",
            surr.space.dim(),
            input_names.len()
        )));
    }
    let n_in = input_names.len();
    Ok(SurrogateUnit {
        name: name.into(),
        input_names,
        inputs: vec![0.0; n_in],
        t: 0.0,
        outputs: vec![0.0; surr.n_outputs()],
        stepped: false,
        extrapolated: false,
        surr,
    })
}

impl SurrogateUnit {
    fn predict_at_local(&mut self, t_local: f64) -> Result<(), CosimError> {
        let (rows, extrap) = predict_rows(&self.surr, &self.inputs, &[t_local])?;
        for (v, o) in self.outputs.iter_mut().enumerate() {
            *o = rows[(0, v)];
        }
        self.extrapolated |= extrap;
        Ok(())
    }
}

impl SimulationUnit for SurrogateUnit {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_names(&self) -> &[String] {
        &self.input_names
    }

    fn output_names(&self) -> &[String] {
        &self.surr.labels
    }

    fn reset(&mut self, _p: &[f64], t0: f64) -> Result<(), CosimError> {
        self.t = t0;
        self.inputs.fill(0.0);
        self.stepped = false;
        self.extrapolated = false;
        self.outputs.fill(0.0);
        Ok(())
    }

    fn set_inputs(&mut self, values: &[f64]) -> Result<(), CosimError> {
        if values.len() != self.inputs.len() {
            return Err(CosimError::InvalidCoupling(format!(
                "surrogate unit '{}' expects {} inputs, got {}",
                self.name,
                self.inputs.len(),
                values.len()
            )));
        }
        self.inputs.copy_from_slice(values);
        if !self.stepped {
            // before the first step the outputs track the exchanged inputs
            // at the interval-local origin
            self.predict_at_local(0.0)?;
        }
        Ok(())
    }

    fn step(&mut self, to_time: f64) -> Result<(), CosimError> {
        let h_local = to_time - self.t;
        if h_local <= 0.0 {
            return Err(CosimError::InvalidCoupling(format!(
                "step target {to_time} not ahead of current time {}",
                self.t
            )));
        }
        self.predict_at_local(h_local)?;
        self.t = to_time;
        self.stepped = true;
        Ok(())
    }

    fn get_outputs(&self) -> Vec<f64> {
        self.outputs.clone()
    }

    fn extrapolation_seen(&self) -> bool {
        self.extrapolated
    }
}

/// One directed connection from a unit output to a unit input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wire {
    pub from_unit: usize,
    pub from_output: usize,
    pub to_unit: usize,
    pub to_input: usize,
}

/// Wiring plus the communication grid.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub wires: Vec<Wire>,
    pub h: f64,
    pub t0: f64,
    pub tf: f64,
}

impl Coupling {
    pub fn n_steps(&self) -> usize {
        ((self.tf - self.t0) / self.h).round() as usize
    }

    fn validate(&self, units: &[&mut dyn SimulationUnit]) -> Result<(), CosimError> {
        if !(self.h > 0.0) {
            return Err(CosimError::InvalidCoupling("communication step must be positive".into()));
        }
        let ratio = (self.tf - self.t0) / self.h;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(CosimError::InvalidCoupling(format!(
                "(tf - t0)/h = {ratio} is not an integer step count"
            )));
        }
        for w in &self.wires {
            if w.from_unit >= units.len() || w.to_unit >= units.len() {
                return Err(CosimError::InvalidCoupling("wire references unknown unit".into()));
            }
            if w.from_output >= units[w.from_unit].output_names().len() {
                return Err(CosimError::InvalidCoupling("wire references unknown output".into()));
            }
            if w.to_input >= units[w.to_unit].input_names().len() {
                return Err(CosimError::InvalidCoupling("wire references unknown input".into()));
            }
        }
        for (u, unit) in units.iter().enumerate() {
            for (i, input) in unit.input_names().iter().enumerate() {
                let n = self
                    .wires
                    .iter()
                    .filter(|w| w.to_unit == u && w.to_input == i)
                    .count();
                if n == 0 {
                    return Err(CosimError::DeadlockedWiring {
                        unit: unit.name().into(),
                        input: input.clone(),
                    });
                }
                if n > 1 {
                    return Err(CosimError::DuplicateWiring {
                        unit: unit.name().into(),
                        input: input.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Resolve `"unit.output" -> "unit.input"` name pairs into wires.
pub fn resolve_wiring(
    units: &[&mut dyn SimulationUnit],
    pairs: &[(String, String)],
) -> Result<Vec<Wire>, CosimError> {
    let find_unit = |name: &str| -> Result<usize, CosimError> {
        units
            .iter()
            .position(|u| u.name() == name)
            .ok_or_else(|| CosimError::UnknownName(name.into()))
    };
    let split = |s: &str| -> Result<(String, String), CosimError> {
        s.split_once('.')
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .ok_or_else(|| CosimError::UnknownName(s.into()))
    };
    pairs
        .iter()
        .map(|(from, to)| {
            let (fu, fo) = split(from)?;
            let (tu, ti) = split(to)?;
            let from_unit = find_unit(&fu)?;
            let to_unit = find_unit(&tu)?;
            let from_output = units[from_unit]
                .output_names()
                .iter()
                .position(|o| *o == fo)
                .ok_or_else(|| CosimError::UnknownName(from.clone()))?;
            let to_input = units[to_unit]
                .input_names()
                .iter()
                .position(|i| *i == ti)
                .ok_or_else(|| CosimError::UnknownName(to.clone()))?;
            Ok(Wire { from_unit, from_output, to_unit, to_input })
        })
        .collect()
}

/// Input values observed by one unit over a co-simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInputLog {
    pub unit_name: String,
    pub input_names: Vec<String>,
    /// One sample per communication point.
    pub samples: Vec<Vec<f64>>,
}

/// Result of a master run: the coupled variables at every communication
/// point, per-unit input logs, and the extrapolation flag of any surrogate
/// units involved.
#[derive(Debug, Clone)]
pub struct CosimRun {
    pub trajectory: Trajectory,
    pub input_logs: Vec<UnitInputLog>,
    pub extrapolated: bool,
}

/// Jacobi co-simulation master. At every communication point all outputs
/// are read, all wired inputs are written, then every unit steps to the
/// next point. Initial outputs are exchanged once before the first step.
/// Records the wired source variables at every communication point (all
/// outputs when the wiring is empty).
pub fn master_cosim(
    units: &mut [&mut dyn SimulationUnit],
    coupling: &Coupling,
    p_per_unit: &[Vec<f64>],
) -> Result<CosimRun, CosimError> {
    coupling.validate(units)?;
    if p_per_unit.len() != units.len() {
        return Err(CosimError::InvalidCoupling(format!(
            "{} parameter vectors for {} units",
            p_per_unit.len(),
            units.len()
        )));
    }

    // recorded variables: wired sources (deduplicated), or everything
    let mut recorded: Vec<(usize, usize)> = Vec::new();
    if coupling.wires.is_empty() {
        for (u, unit) in units.iter().enumerate() {
            for o in 0..unit.output_names().len() {
                recorded.push((u, o));
            }
        }
    } else {
        for w in &coupling.wires {
            if !recorded.contains(&(w.from_unit, w.from_output)) {
                recorded.push((w.from_unit, w.from_output));
            }
        }
    }
    let labels: Vec<String> = recorded
        .iter()
        .map(|&(u, o)| format!("{}.{}", units[u].name(), units[u].output_names()[o]))
        .collect();

    for (unit, p) in units.iter_mut().zip(p_per_unit) {
        unit.reset(p, coupling.t0)?;
    }

    let n_steps = coupling.n_steps();
    let mut rows: Vec<f64> = Vec::with_capacity((n_steps + 1) * recorded.len());
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut input_logs: Vec<UnitInputLog> = units
        .iter()
        .map(|u| UnitInputLog {
            unit_name: u.name().into(),
            input_names: u.input_names().to_vec(),
            samples: Vec::with_capacity(n_steps + 1),
        })
        .collect();

    let exchange_and_record =
        |units: &mut [&mut dyn SimulationUnit],
         t: f64,
         times: &mut Vec<f64>,
         rows: &mut Vec<f64>,
         input_logs: &mut Vec<UnitInputLog>|
         -> Result<(), CosimError> {
            let outputs: Vec<Vec<f64>> = units.iter().map(|u| u.get_outputs()).collect();
            let mut inputs: Vec<Vec<f64>> =
                units.iter().map(|u| vec![0.0; u.input_names().len()]).collect();
            for w in &coupling.wires {
                inputs[w.to_unit][w.to_input] = outputs[w.from_unit][w.from_output];
            }
            for (u, unit) in units.iter_mut().enumerate() {
                if !unit.input_names().is_empty() {
                    unit.set_inputs(&inputs[u])?;
                }
                input_logs[u].samples.push(inputs[u].clone());
            }
            times.push(t);
            // re-read so the recorded row reflects the exchanged inputs
            for &(u, o) in &recorded {
                rows.push(units[u].get_outputs()[o]);
            }
            Ok(())
        };

    exchange_and_record(units, coupling.t0, &mut times, &mut rows, &mut input_logs)?;
    for k in 1..=n_steps {
        let t_next = if k == n_steps { coupling.tf } else { coupling.t0 + k as f64 * coupling.h };
        for unit in units.iter_mut() {
            unit.step(t_next)?;
        }
        exchange_and_record(units, t_next, &mut times, &mut rows, &mut input_logs)?;
    }

    let n = times.len();
    let n_vars = labels.len();
    let values = DMatrix::from_row_iterator(n, n_vars, rows);
    let trajectory = Trajectory::new(times, values, labels)?;
    let extrapolated = units.iter().any(|u| u.extrapolation_seen());
    Ok(CosimRun { trajectory, input_logs, extrapolated })
}

/// Bounding box of the inputs one unit received during a run, inflated 5%
/// per side (degenerate dimensions get 5% of max(|center|, 1)). Suitable as
/// the training space for a surrogate of that unit.
pub fn record_cosim_inputs(
    run: &CosimRun,
    unit_index: usize,
) -> Result<(ParameterSpace, Vec<Vec<f64>>), CosimError> {
    let log = run
        .input_logs
        .get(unit_index)
        .ok_or_else(|| CosimError::InvalidCoupling(format!("no unit {unit_index}")))?;
    if log.input_names.is_empty() {
        return Err(CosimError::InvalidCoupling(format!(
            "unit '{}' has no inputs to record",
            log.unit_name
        )));
    }
    let d = log.input_names.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for s in &log.samples {
        for j in 0..d {
            lo[j] = lo[j].min(s[j]);
            hi[j] = hi[j].max(s[j]);
        }
    }
    for j in 0..d {
        let center = 0.5 * (lo[j] + hi[j]);
        let mut half = 0.5 * (hi[j] - lo[j]);
        half = if half > 0.0 { half * 1.05 } else { 0.05 * center.abs().max(1.0) };
        lo[j] = center - half;
        hi[j] = center + half;
    }
    let space = ParameterSpace::new(
        log.input_names.clone(),
        lo,
        hi,
        vec![Scale::Linear; d],
    )
    .map_err(|e| CosimError::InvalidCoupling(e.to_string()))?;
    Ok((space, log.samples.clone()))
}
