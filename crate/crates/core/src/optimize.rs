//! Black-box global optimization with adaptive differential evolution
//! (DE/rand/1/bin, per-mutation weight jitter), plus the average-COP
//! objective evaluated on model or surrogate trajectories.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctesn::TrainedSurrogate;
use crate::models::ParametrizedModel;
use crate::sampling::{latin_hypercube, ParameterSpace};
use crate::timeseries::Trajectory;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("trajectory lacks required output '{0}'")]
    MissingOutputLabel(String),
    #[error("evaluation budget {max_evals} is below the population size {population}")]
    BudgetTooSmall { max_evals: usize, population: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown objective '{0}'")]
    UnknownObjective(String),
    #[error(transparent)]
    Train(#[from] crate::ctesn::TrainError),
    #[error(transparent)]
    Timeseries(#[from] crate::timeseries::TimeseriesError),
}

/// Differential evolution configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeConfig {
    pub population: usize,
    pub max_evals: usize,
    /// Differential weight base; each mutation draws its weight uniformly
    /// from [F - 0.2, F + 0.3] (the adaptive jitter).
    pub f: f64,
    /// Crossover rate.
    pub cr: f64,
    pub seed: u64,
    /// Early stop: no improvement larger than this over 20 consecutive
    /// generations.
    pub target_tolerance: Option<f64>,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self { population: 50, max_evals: 5000, f: 0.7, cr: 0.9, seed: 0, target_tolerance: None }
    }
}

impl DeConfig {
    fn validate(&self) -> Result<(), OptimizeError> {
        if self.population < 4 {
            return Err(OptimizeError::InvalidConfig("population must be at least 4".into()));
        }
        if !(self.cr > 0.0 && self.cr <= 1.0) {
            return Err(OptimizeError::InvalidConfig("CR must lie in (0, 1]".into()));
        }
        if !(self.f > 0.0 && self.f < 2.0) {
            return Err(OptimizeError::InvalidConfig("F must lie in (0, 2)".into()));
        }
        if self.max_evals < self.population {
            return Err(OptimizeError::BudgetTooSmall {
                max_evals: self.max_evals,
                population: self.population,
            });
        }
        Ok(())
    }
}

/// One recorded improvement of the running best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub evals: usize,
    pub wall_time_s: f64,
    pub best_value: f64,
    pub point: Vec<f64>,
}

/// Optimization outcome. `best_value_full_model` and `full_history` are
/// filled by surrogate-driven runs: the loss re-evaluated through the full
/// model's objective at the winner and at every improvement point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<HistoryEntry>,
    pub evals_used: usize,
    pub best_value_full_model: Option<f64>,
    pub full_history: Option<Vec<f64>>,
}

/// Mean coefficient of performance over the trajectory's span, sampled at
/// `n_t` uniform times through cubic splines:
/// `COP(t) = Q_c(t) / max(0.01, CSP(t))`.
pub fn average_cop(traj: &Trajectory, n_t: usize) -> Result<f64, OptimizeError> {
    let q_idx = traj
        .column_index("Q_c")
        .ok_or_else(|| OptimizeError::MissingOutputLabel("Q_c".into()))?;
    let c_idx = traj
        .column_index("CSP")
        .ok_or_else(|| OptimizeError::MissingOutputLabel("CSP".into()))?;
    let spline = traj.to_spline()?;
    let (lo, hi) = spline.domain();
    let mut acc = 0.0;
    for j in 0..n_t {
        let t = lo + (hi - lo) * j as f64 / (n_t - 1) as f64;
        let q = spline.eval_var(t, q_idx);
        let csp = spline.eval_var(t, c_idx);
        acc += q / csp.max(0.01);
    }
    Ok(acc / n_t as f64)
}

/// Sample count of the COP average.
pub const COP_SAMPLES: usize = 720;

/// Minimize a black-box objective over the box with DE/rand/1/bin.
///
/// Non-finite objective values count as +infinity. Mutation runs in unit
/// coordinates (log dimensions mutate in log space) with box constraints
/// enforced by reflection; selection is greedy. The run is deterministic
/// for a fixed seed.
pub fn differential_evolution<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    space: &ParameterSpace,
    cfg: &DeConfig,
) -> Result<OptResult, OptimizeError> {
    cfg.validate()?;
    let d = space.dim();
    let np = cfg.population;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut eval = |p: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = objective(p);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // seeded LHS initial population, stored in unit coordinates
    let init = latin_hypercube(space, np, cfg.seed);
    let mut pop: Vec<Vec<f64>> = init.iter().map(|p| space.to_unit(p)).collect();
    let mut fitness = vec![f64::INFINITY; np];
    let mut evals = 0usize;
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut best_idx = 0usize;
    for i in 0..np {
        fitness[i] = eval(&init[i], &mut evals);
        if fitness[i] < fitness[best_idx] {
            best_idx = i;
        }
    }
    history.push(HistoryEntry {
        evals,
        wall_time_s: start.elapsed().as_secs_f64(),
        best_value: fitness[best_idx],
        point: init[best_idx].clone(),
    });

    let f_lo = (cfg.f - 0.2).max(1e-3);
    let f_hi = (cfg.f + 0.3).min(2.0);
    let mut stall_generations = 0usize;
    let mut trial = vec![0.0; d];

    'outer: while evals < cfg.max_evals {
        let gen_best_before = fitness[best_idx];
        for i in 0..np {
            if evals >= cfg.max_evals {
                break 'outer;
            }
            // three distinct partners, all different from i
            let mut pick = || loop {
                let k = rng.random_range(0..np);
                if k != i {
                    return k;
                }
            };
            let a = pick();
            let b = loop {
                let k = pick();
                if k != a {
                    break k;
                }
            };
            let c = loop {
                let k = pick();
                if k != a && k != b {
                    break k;
                }
            };
            let f_jit = rng.random_range(f_lo..f_hi);
            let j_rand = rng.random_range(0..d);
            for j in 0..d {
                let mutate = rng.random::<f64>() < cfg.cr || j == j_rand;
                let mut v = if mutate {
                    pop[a][j] + f_jit * (pop[b][j] - pop[c][j])
                } else {
                    pop[i][j]
                };
                // reflect into the unit box
                while !(0.0..=1.0).contains(&v) {
                    if v < 0.0 {
                        v = -v;
                    } else {
                        v = 2.0 - v;
                    }
                }
                trial[j] = v;
            }
            let candidate = space.from_unit(&trial);
            let value = eval(&candidate, &mut evals);
            if value <= fitness[i] {
                pop[i].copy_from_slice(&trial);
                fitness[i] = value;
                if value < fitness[best_idx] {
                    best_idx = i;
                    history.push(HistoryEntry {
                        evals,
                        wall_time_s: start.elapsed().as_secs_f64(),
                        best_value: value,
                        point: candidate,
                    });
                }
            }
        }
        if let Some(tol) = cfg.target_tolerance {
            if gen_best_before - fitness[best_idx] <= tol {
                stall_generations += 1;
                if stall_generations >= 20 {
                    break;
                }
            } else {
                stall_generations = 0;
            }
        }
    }

    Ok(OptResult {
        best_point: space.from_unit(&pop[best_idx]),
        best_value: fitness[best_idx],
        history,
        evals_used: evals,
        best_value_full_model: None,
        full_history: None,
    })
}

/// Named objectives runnable against models and surrogates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Negated [`average_cop`]; minimizing it maximizes mean COP.
    NegAvgCop,
}

impl std::str::FromStr for Objective {
    type Err = OptimizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neg_avg_cop" => Ok(Objective::NegAvgCop),
            other => Err(OptimizeError::UnknownObjective(other.into())),
        }
    }
}

fn model_objective_value(model: &ParametrizedModel, p: &[f64]) -> f64 {
    let opts = model.reference_solve_opts();
    match model.solve(p, &opts) {
        Ok(traj) => match average_cop(&traj, COP_SAMPLES) {
            Ok(cop) => -cop,
            Err(_) => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    }
}

/// Optimize the full model: each evaluation is a stiff reference solve.
pub fn optimize_model(
    model: &ParametrizedModel,
    objective: Objective,
    cfg: &DeConfig,
) -> Result<OptResult, OptimizeError> {
    let Objective::NegAvgCop = objective;
    // fail fast if the model lacks the required outputs
    let probe = model
        .solve(&model.default_params(), &model.reference_solve_opts())
        .map_err(crate::ctesn::TrainError::from)?;
    average_cop(&probe, 8)?;
    differential_evolution(|p| model_objective_value(model, p), &model.param_space, cfg)
}

/// Optimize over the surrogate. When the full model is provided, every
/// recorded improvement point and the final winner are re-evaluated through
/// the full model's objective (the loss a report should quote).
pub fn optimize_surrogate(
    surr: &TrainedSurrogate,
    full_model: Option<&ParametrizedModel>,
    objective: Objective,
    cfg: &DeConfig,
) -> Result<OptResult, OptimizeError> {
    let Objective::NegAvgCop = objective;
    let probe = surr.predict(&surr.p_star, &surr.grid_times)?;
    average_cop(&probe.trajectory, 8)?;
    let surrogate_value = |p: &[f64]| -> f64 {
        match surr.predict(p, &surr.grid_times) {
            Ok(pred) => match average_cop(&pred.trajectory, COP_SAMPLES) {
                Ok(cop) => -cop,
                Err(_) => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };
    let mut result = differential_evolution(surrogate_value, &surr.space, cfg)?;
    if let Some(model) = full_model {
        let full: Vec<f64> =
            result.history.iter().map(|h| model_objective_value(model, &h.point)).collect();
        result.best_value_full_model = Some(model_objective_value(model, &result.best_point));
        result.full_history = Some(full);
    }
    Ok(result)
}
