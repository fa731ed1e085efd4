//! Strict JSON run configuration: unknown keys are rejected so typos fail
//! fast instead of silently falling back to defaults.

use serde::{Deserialize, Serialize};

use ctesn_core::sampling::{ParameterSpace, Scale};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name.
    pub model: String,
    /// Output directory (the --out-dir flag overrides it).
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Optional override of the model's parameter space.
    #[serde(default)]
    pub parameter_space: Option<SpaceConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub surrogate: Option<SurrogateConfig>,
    #[serde(default)]
    pub validation: Option<ValidationConfig>,
    #[serde(default)]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default)]
    pub cosim: Option<CosimConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub scale: Option<Vec<Scale>>,
}

impl SpaceConfig {
    pub fn build(&self) -> Result<ParameterSpace, String> {
        let scale = self.scale.clone().unwrap_or_else(|| vec![Scale::Linear; self.names.len()]);
        ParameterSpace::new(self.names.clone(), self.lower.clone(), self.upper.clone(), scale)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Parameter point; defaults to the space center.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    /// Optional explicit save times.
    #[serde(default)]
    pub saveat: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    /// "lp" or "np".
    pub variant: String,
    pub n_r: usize,
    #[serde(default)]
    pub density: Option<f64>,
    #[serde(default)]
    pub spectral_radius: Option<f64>,
    #[serde(default)]
    pub input_scale: Option<f64>,
    pub seed: u64,
    pub n_train: usize,
    #[serde(default)]
    pub np_centers: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_test: usize,
    #[serde(default = "default_error_points")]
    pub n_error_points: usize,
}

fn default_error_points() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    pub max_evals: usize,
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default = "default_cr")]
    pub cr: f64,
    pub seed: u64,
    #[serde(default)]
    pub target_tolerance: Option<f64>,
    /// "model", "surrogate" or "both".
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Surrogate artifact to optimize over; trained fresh when absent.
    #[serde(default)]
    pub surrogate_file: Option<String>,
    #[serde(default = "default_objective")]
    pub objective: String,
}

fn default_population() -> usize {
    50
}
fn default_f() -> f64 {
    0.7
}
fn default_cr() -> f64 {
    0.9
}
fn default_mode() -> String {
    "both".into()
}
fn default_objective() -> String {
    "neg_avg_cop".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosimConfig {
    pub h: f64,
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
    /// Unit names to instantiate, in order.
    pub units: Vec<String>,
    /// Wires as ["unit.output", "unit.input"] pairs.
    pub wiring: Vec<(String, String)>,
    /// Design parameters per unit, keyed by unit name.
    pub params: std::collections::BTreeMap<String, Vec<f64>>,
    /// Unit to replace by a trained surrogate; native-only run when absent.
    #[serde(default)]
    pub surrogate_unit: Option<String>,
    #[serde(default = "default_cosim_n_train")]
    pub n_train: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cosim_n_r")]
    pub n_r: usize,
    /// Save-grid size of the interval-local unit surrogate.
    #[serde(default = "default_unit_grid")]
    pub unit_save_points: usize,
}

fn default_cosim_n_train() -> usize {
    40
}
fn default_cosim_n_r() -> usize {
    3
}
fn default_unit_grid() -> usize {
    60
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))
    }
}
