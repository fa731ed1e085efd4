//! Command implementations: simulate, train, optimize, cosim, report.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use ctesn_core::artifact::{self, ArtifactError};
use ctesn_core::cosim::{
    master_cosim, native_unit, record_cosim_inputs, resolve_wiring, surrogate_unit, CosimError,
    CosimRun, Coupling, SimulationUnit, SurrogateUnit,
};
use ctesn_core::ctesn::{
    train_lpctesn, train_npctesn, validate_surrogate, Activation, ReservoirSpec, TrainError,
    TrainOptions, TrainedSurrogate, ValidateOptions,
};
use ctesn_core::models::{self, restrict_model, ParametrizedModel};
use ctesn_core::optimize::{
    optimize_model, optimize_surrogate, DeConfig, Objective, OptResult, OptimizeError,
};
use ctesn_core::sampling::{sobol_sample, ParameterSpace};
use ctesn_core::timeseries::relative_error_series;

use crate::config::{RunConfig, SurrogateConfig};
use crate::plot::Plot;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or precondition: exit 2.
    Config(String),
    /// Numeric, solver or training failure: exit 3.
    Numeric(String),
    /// Artifact format, version or checksum problem: exit 4.
    Artifact(ArtifactError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Artifact(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Artifact(e) => write!(f, "artifact error: {e}"),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Artifact(e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::TooFewSamples { .. } | TrainError::InvalidInput(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::BudgetTooSmall { .. }
            | OptimizeError::InvalidConfig(_)
            | OptimizeError::UnknownObjective(_)
            | OptimizeError::MissingOutputLabel(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<CosimError> for CliError {
    fn from(e: CosimError) -> Self {
        match e {
            CosimError::DeadlockedWiring { .. }
            | CosimError::DuplicateWiring { .. }
            | CosimError::InvalidCoupling(_)
            | CosimError::UnknownName(_) => CliError::Config(e.to_string()),
            CosimError::Train(t) => CliError::from(t),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Everything a command needs besides its config section.
pub struct Ctx {
    pub config: RunConfig,
    pub command: &'static str,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub quiet: bool,
    pub jobs: Option<usize>,
}

impl Ctx {
    fn model(&self) -> Result<ParametrizedModel, CliError> {
        models::by_name(&self.config.model).ok_or_else(|| {
            CliError::Config(format!(
                "unknown model name '{}' in field 'model' (expected one of {:?})",
                self.config.model,
                models::MODEL_NAMES
            ))
        })
    }

    fn space(&self, model: &ParametrizedModel) -> Result<ParameterSpace, CliError> {
        match &self.config.parameter_space {
            None => Ok(model.param_space.clone()),
            Some(sc) => sc.build().map_err(|e| CliError::Config(format!("parameter_space: {e}"))),
        }
    }

    fn surrogate_seed(&self, cfg: &SurrogateConfig) -> u64 {
        self.seed_override.unwrap_or(cfg.seed)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Numeric(format!("cannot create out dir: {e}")))?;
        let path = self.out_dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    /// Manifest with everything needed to reproduce the run.
    fn write_manifest(&self) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "ctesn",
            "version": ctesn_core::VERSION,
            "command": self.command,
            "config": serde_json::to_value(&self.config)
                .map_err(|e| CliError::Numeric(e.to_string()))?,
            "overrides": {
                "out_dir": self.out_dir.display().to_string(),
                "seed": self.seed_override,
                "jobs": self.jobs,
            },
        });
        self.write(
            "manifest.json",
            serde_json::to_string_pretty(&manifest)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .as_bytes(),
        )?;
        Ok(())
    }
}

fn reservoir_spec(cfg: &SurrogateConfig, seed: u64) -> ReservoirSpec {
    let mut spec = ReservoirSpec::with_defaults(cfg.n_r, seed);
    if let Some(d) = cfg.density {
        spec.density = d;
    }
    if let Some(r) = cfg.spectral_radius {
        spec.spectral_radius = r;
    }
    if let Some(s) = cfg.input_scale {
        spec.input_scale = s;
    }
    spec.activation = Activation::Tanh;
    spec
}

fn train_from_config(
    model: &ParametrizedModel,
    space: &ParameterSpace,
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<TrainedSurrogate, CliError> {
    let spec = reservoir_spec(cfg, seed);
    let mut opts = TrainOptions::for_model(model);
    opts.n_train = cfg.n_train;
    opts.seed = seed.wrapping_add(1);
    if let Some(c) = cfg.np_centers {
        opts.np_centers = c;
    }
    let surr = match cfg.variant.as_str() {
        "lp" => train_lpctesn(model, space, &spec, &opts)?,
        "np" => train_npctesn(model, space, &spec, &opts)?,
        other => {
            return Err(CliError::Config(format!(
                "surrogate.variant must be 'lp' or 'np', got '{other}'"
            )))
        }
    };
    Ok(surr)
}

pub fn cmd_simulate(ctx: &Ctx) -> Result<(), CliError> {
    let model = ctx.model()?;
    let sim = ctx.config.simulate.clone().unwrap_or(crate::config::SimulateConfig {
        p: None,
        saveat: None,
    });
    let p = sim.p.unwrap_or_else(|| model.default_params());
    if p.len() != model.param_space.dim() {
        return Err(CliError::Config(format!(
            "simulate.p has {} entries, model '{}' expects {}",
            p.len(),
            model.name,
            model.param_space.dim()
        )));
    }
    let saveat = sim.saveat.unwrap_or_else(|| model.save_grid.clone());
    let traj = model
        .solve_on(&p, model.tspan, &saveat, &model.reference_solve_opts())
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(|e| CliError::Numeric(e.to_string()))?;
    let path = ctx.write("trajectory.csv", &csv)?;
    ctx.write_manifest()?;
    ctx.note(&format!("wrote {} ({} rows)", path.display(), traj.len()));
    Ok(())
}

pub fn cmd_train(ctx: &Ctx) -> Result<(), CliError> {
    let model = ctx.model()?;
    let space = ctx.space(&model)?;
    let cfg = ctx
        .config
        .surrogate
        .clone()
        .ok_or_else(|| CliError::Config("missing 'surrogate' section".into()))?;
    let val = ctx.config.validation.clone().unwrap_or(crate::config::ValidationConfig {
        n_test: 100,
        n_error_points: 1000,
    });
    let seed = ctx.surrogate_seed(&cfg);

    ctx.note(&format!(
        "training {} surrogate of '{}' (N_R = {}, n_train = {})",
        cfg.variant, model.name, cfg.n_r, cfg.n_train
    ));
    let surr = train_from_config(&model, &space, &cfg, seed)?;

    let vopts = ValidateOptions {
        n_error_points: val.n_error_points,
        ..ValidateOptions::for_model(&model)
    };
    let report = validate_surrogate(&surr, &model, val.n_test, &vopts)?;

    let artifact_path = ctx.out_dir.join("surrogate.json");
    ctx.write("surrogate.json", &artifact::surrogate_to_json(&surr, &model.name)?)?;
    ctx.write(
        "report.json",
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Numeric(e.to_string()))?
            .as_bytes(),
    )?;

    // worst held-out point: error-vs-time CSV plus truth/prediction plots
    let worst = report
        .mean_max_per_point_pct
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let points = sobol_sample(&space, val.n_test).map_err(|e| CliError::Config(e.to_string()))?;
    let p_worst = &points[worst];
    let truth = model
        .solve(p_worst, &vopts.solve_opts)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let pred = surr.predict(p_worst, &surr.grid_times)?;
    let mut grid = model.error_grid.clone();
    grid.n_points = val.n_error_points;
    let err = relative_error_series(
        &pred.trajectory.to_spline().map_err(TrainError::from)?,
        &truth.to_spline().map_err(TrainError::from)?,
        &grid,
    )
    .map_err(TrainError::from)?;
    let mut csv = String::from("t");
    for l in surr.labels.iter() {
        csv.push_str(&format!(",err_{l}"));
    }
    csv.push('\n');
    for (j, t) in err.times.iter().enumerate() {
        csv.push_str(&format!("{t}"));
        for v in 0..surr.labels.len() {
            csv.push_str(&format!(",{}", err.errors[(j, v)]));
        }
        csv.push('\n');
    }
    ctx.write("error_worst_point.csv", csv.as_bytes())?;

    let log_x = matches!(
        model.error_grid.spacing,
        ctesn_core::timeseries::GridSpacing::LogUniform
    );
    for (v, label) in surr.labels.iter().enumerate() {
        let truth_pts: Vec<(f64, f64)> =
            (0..truth.len()).map(|i| (truth.times()[i], truth.values()[(i, v)])).collect();
        let pred_pts: Vec<(f64, f64)> = (0..pred.trajectory.len())
            .map(|i| (pred.trajectory.times()[i], pred.trajectory.values()[(i, v)]))
            .collect();
        let plot = Plot {
            title: format!("{label}: prediction vs truth at the worst test point"),
            x_label: if log_x { "t (log scale)".into() } else { "t".into() },
            y_label: label.clone(),
            log_x,
            series: vec![("truth".into(), truth_pts), ("prediction".into(), pred_pts)],
        };
        ctx.write(&format!("plot_{label}.svg"), plot.render().as_bytes())?;
    }

    ctx.write_manifest()?;
    ctx.note(&format!(
        "trained: avg rel err {:.4}% (self {:.4}%), speedup {:.0}x; artifact at {}",
        report.avg_rel_err_pct,
        surr.train_meta.train_self_error_pct,
        report.speedup,
        artifact_path.display()
    ));
    Ok(())
}

fn convergence_csv(result: &OptResult) -> String {
    let with_full = result.full_history.is_some();
    let mut csv = String::from("eval_count,wall_time_s,best_value");
    if with_full {
        csv.push_str(",full_model_value");
    }
    csv.push('\n');
    for (i, h) in result.history.iter().enumerate() {
        csv.push_str(&format!("{},{},{}", h.evals, h.wall_time_s, h.best_value));
        if let Some(full) = &result.full_history {
            csv.push_str(&format!(",{}", full[i]));
        }
        csv.push('\n');
    }
    csv
}

pub fn cmd_optimize(ctx: &Ctx) -> Result<(), CliError> {
    let model = ctx.model()?;
    let cfg = ctx
        .config
        .optimize
        .clone()
        .ok_or_else(|| CliError::Config("missing 'optimize' section".into()))?;
    let objective: Objective = cfg.objective.parse()?;
    let de = DeConfig {
        population: cfg.population,
        max_evals: cfg.max_evals,
        f: cfg.f,
        cr: cfg.cr,
        seed: ctx.seed_override.unwrap_or(cfg.seed),
        target_tolerance: cfg.target_tolerance,
    };

    let run_model = cfg.mode == "model" || cfg.mode == "both";
    let run_surrogate = cfg.mode == "surrogate" || cfg.mode == "both";
    if !run_model && !run_surrogate {
        return Err(CliError::Config(format!(
            "optimize.mode must be 'model', 'surrogate' or 'both', got '{}'",
            cfg.mode
        )));
    }

    if run_model {
        ctx.note(&format!("optimizing full model '{}' ({} evals)", model.name, de.max_evals));
        let result = optimize_model(&model, objective, &de)?;
        ctx.write(
            "optresult_model.json",
            serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .as_bytes(),
        )?;
        ctx.write("convergence_model.csv", convergence_csv(&result).as_bytes())?;
        ctx.note(&format!(
            "  model best {} at {:?} ({} evals)",
            result.best_value, result.best_point, result.evals_used
        ));
    }

    if run_surrogate {
        let surr = match &cfg.surrogate_file {
            Some(path) => {
                let (surr, trained_on) = artifact::load_surrogate(Path::new(path))?;
                if trained_on != model.name {
                    return Err(CliError::Config(format!(
                        "surrogate was trained on '{trained_on}', config names model '{}'",
                        model.name
                    )));
                }
                surr
            }
            None => {
                let scfg = ctx.config.surrogate.clone().ok_or_else(|| {
                    CliError::Config(
                        "optimize over a surrogate needs 'optimize.surrogate_file' or a \
                         'surrogate' section to train one"
                            .into(),
                    )
                })?;
                let space = ctx.space(&model)?;
                ctx.note("training surrogate for optimization");
                train_from_config(&model, &space, &scfg, ctx.surrogate_seed(&scfg))?
            }
        };
        ctx.note(&format!("optimizing surrogate ({} evals)", de.max_evals));
        let result = optimize_surrogate(&surr, Some(&model), objective, &de)?;
        ctx.write(
            "optresult_surrogate.json",
            serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .as_bytes(),
        )?;
        ctx.write("convergence_surrogate.csv", convergence_csv(&result).as_bytes())?;
        ctx.note(&format!(
            "  surrogate best {} (full-model re-evaluation {:?})",
            result.best_value, result.best_value_full_model
        ));
    }

    ctx.write_manifest()?;
    Ok(())
}

fn cosim_trace_csv(run: &CosimRun) -> Result<Vec<u8>, CliError> {
    let mut csv = Vec::new();
    run.trajectory.write_csv(&mut csv).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(csv)
}

pub fn cmd_cosim(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx
        .config
        .cosim
        .clone()
        .ok_or_else(|| CliError::Config("missing 'cosim' section".into()))?;

    let build_native_units = || -> Result<Vec<ctesn_core::cosim::NativeUnit>, CliError> {
        cfg.units
            .iter()
            .map(|name| {
                models::by_name(name)
                    .map(native_unit)
                    .ok_or_else(|| CliError::Config(format!("unknown unit model '{name}'")))
            })
            .collect()
    };
    let params_for = |name: &str| -> Result<Vec<f64>, CliError> {
        cfg.params
            .get(name)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("cosim.params is missing unit '{name}'")))
    };

    // native + native reference run
    let mut natives = build_native_units()?;
    let mut units: Vec<&mut dyn SimulationUnit> =
        natives.iter_mut().map(|u| u as &mut dyn SimulationUnit).collect();
    let wires = resolve_wiring(&units, &cfg.wiring)?;
    let coupling = Coupling { wires, h: cfg.h, t0: cfg.t0, tf: cfg.tf };
    let p_per_unit: Vec<Vec<f64>> =
        cfg.units.iter().map(|n| params_for(n)).collect::<Result<_, _>>()?;
    ctx.note(&format!(
        "co-simulating {} units over [{}, {}] at h = {}",
        cfg.units.len(),
        cfg.t0,
        cfg.tf,
        cfg.h
    ));
    let native_run = master_cosim(&mut units, &coupling, &p_per_unit)?;
    ctx.write("cosim_native.csv", &cosim_trace_csv(&native_run)?)?;

    if let Some(surr_name) = &cfg.surrogate_unit {
        let unit_idx = cfg
            .units
            .iter()
            .position(|n| n == surr_name)
            .ok_or_else(|| CliError::Config(format!("surrogate_unit '{surr_name}' not in units")))?;
        let base = models::by_name(surr_name)
            .ok_or_else(|| CliError::Config(format!("unknown unit model '{surr_name}'")))?;
        if base.input_names.is_empty() {
            return Err(CliError::Config(format!(
                "unit '{surr_name}' has no inputs; nothing to train over"
            )));
        }

        // train an interval-local surrogate over the observed input box
        let (input_space, _) = record_cosim_inputs(&native_run, unit_idx)?;
        let n_inputs = base.input_names.len();
        let n_design = base.param_space.dim() - n_inputs;
        let design = params_for(surr_name)?;
        if design.len() != n_design {
            return Err(CliError::Config(format!(
                "unit '{surr_name}' expects {n_design} design parameters, got {}",
                design.len()
            )));
        }
        let mut pinned = design.clone();
        pinned.extend(vec![0.0; n_inputs]);
        let free: Vec<usize> = (n_design..n_design + n_inputs).collect();
        let save_grid: Vec<f64> = (0..cfg.unit_save_points)
            .map(|i| cfg.h * i as f64 / (cfg.unit_save_points - 1) as f64)
            .collect();
        let input_names = base.input_names.clone();
        let training_model =
            restrict_model(base, free, pinned, input_space.clone(), (0.0, cfg.h), save_grid);
        let seed = ctx.seed_override.unwrap_or(cfg.seed);
        let spec = ReservoirSpec::with_defaults(cfg.n_r, seed);
        let opts = TrainOptions {
            n_train: cfg.n_train,
            seed: seed.wrapping_add(1),
            ..TrainOptions::for_model(&training_model)
        };
        ctx.note(&format!(
            "training interval-local surrogate of '{surr_name}' over {:?}",
            input_space.names
        ));
        let surr = train_npctesn(&training_model, &input_space, &spec, &opts)?;
        ctx.write("unit_surrogate.json", &artifact::surrogate_to_json(&surr, surr_name)?)?;

        // surrogate + native run
        let mut natives2 = build_native_units()?;
        let mut surr_unit = surrogate_unit(surr_name.clone(), surr, input_names)?;
        let mut units2: Vec<&mut dyn SimulationUnit> = Vec::new();
        let mut surr_slot = Some(&mut surr_unit);
        for (i, u) in natives2.iter_mut().enumerate() {
            if i == unit_idx {
                let slot: &mut SurrogateUnit = surr_slot.take().expect("one surrogate slot");
                units2.push(slot);
            } else {
                units2.push(u as &mut dyn SimulationUnit);
            }
        }
        let wires2 = resolve_wiring(&units2, &cfg.wiring)?;
        let coupling2 = Coupling { wires: wires2, h: cfg.h, t0: cfg.t0, tf: cfg.tf };
        let mut p2 = p_per_unit.clone();
        p2[unit_idx] = vec![];
        let surr_run = master_cosim(&mut units2, &coupling2, &p2)?;
        ctx.write("cosim_surrogate.csv", &cosim_trace_csv(&surr_run)?)?;

        // error summary over the recorded (wired) variables
        let mut per_var = serde_json::Map::new();
        let mut overall: f64 = 0.0;
        for (v, label) in native_run.trajectory.labels().iter().enumerate() {
            let scale = (0..native_run.trajectory.len())
                .map(|i| native_run.trajectory.values()[(i, v)].abs())
                .fold(0.0, f64::max);
            let mut worst: f64 = 0.0;
            for i in 0..native_run.trajectory.len() {
                let diff = (surr_run.trajectory.values()[(i, v)]
                    - native_run.trajectory.values()[(i, v)])
                    .abs();
                worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
            }
            per_var.insert(label.clone(), json!(worst));
            overall = overall.max(worst);
        }
        let error_doc = json!({
            "max_rel_err": overall,
            "max_rel_err_pct": overall * 100.0,
            "per_variable": per_var,
            "extrapolated": surr_run.extrapolated,
            "normalization": "per-variable sup-norm over the native trace",
            "h": cfg.h,
            "communication_points": native_run.trajectory.len(),
        });
        ctx.write(
            "cosim_error.json",
            serde_json::to_string_pretty(&error_doc)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .as_bytes(),
        )?;
        ctx.note(&format!("surrogate drop-in max rel err {:.4}%", overall * 100.0));
    }

    ctx.write_manifest()?;
    Ok(())
}

pub fn cmd_report(artifact_path: &Path, quiet: bool) -> Result<(), CliError> {
    let (surr, model) = artifact::load_surrogate(artifact_path)?;
    let mut text = String::new();
    text.push_str(&format!(
        "surrogate artifact {}\n  model: {model}\n  variant: {}  reservoir size: {}\n",
        artifact_path.display(),
        surr.variant(),
        surr.spec.n_r
    ));
    text.push_str(&format!(
        "  trained on {} points (seed {}), self-consistency {:.4}%\n",
        surr.train_meta.n_train, surr.train_meta.seed, surr.train_meta.train_self_error_pct
    ));
    text.push_str("  trained parameter ranges:\n");
    for i in 0..surr.space.dim() {
        text.push_str(&format!(
            "    {:<12} [{}, {}] ({:?})\n",
            surr.space.names[i], surr.space.lower[i], surr.space.upper[i], surr.space.scale[i]
        ));
    }
    text.push_str(&format!(
        "  outputs: {}\n  save grid: {} points over [{}, {}]\n",
        surr.labels.join(", "),
        surr.grid_times.len(),
        surr.grid_times[0],
        surr.grid_times[surr.grid_times.len() - 1]
    ));

    // sibling diagnostic report from training, when present
    let report_path = artifact_path.with_file_name("report.json");
    if report_path.exists() {
        let body = fs::read_to_string(&report_path)
            .map_err(|e| CliError::Numeric(format!("cannot read report: {e}")))?;
        match serde_json::from_str::<ctesn_core::report::DiagnosticReport>(&body) {
            Ok(report) => {
                text.push('\n');
                text.push_str(&report.render_text());
            }
            Err(e) => text.push_str(&format!("\n(report.json present but unreadable: {e})\n")),
        }
    }

    if !quiet {
        print!("{text}");
    }
    Ok(())
}
