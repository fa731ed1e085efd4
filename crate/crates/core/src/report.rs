//! The diagnostic report produced by surrogate validation: per-output error
//! statistics, the error histogram over test points, parameter coverage and
//! timing against the full model.

use serde::{Deserialize, Serialize};

use crate::sampling::ParameterSpace;

/// Aggregated error statistics for one output over all test points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputErrorStats {
    pub label: String,
    /// Worst max-over-time relative error across test points, percent.
    pub max_rel_err_pct: f64,
    /// Mean over test points of the time-averaged relative error, percent.
    pub avg_rel_err_pct: f64,
    /// The truth signal was identically zero for some test point; absolute
    /// error was reported there instead.
    pub absolute_fallback: bool,
}

/// Histogram of the per-test-point mean (over outputs) of the max-over-time
/// relative error, percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    /// `bins + 1` edges, percent.
    pub edges: Vec<f64>,
    /// `bins` counts; sums to the number of test points.
    pub counts: Vec<usize>,
}

impl ErrorHistogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let hi = values.iter().cloned().fold(0.0f64, f64::max).max(1e-300) * (1.0 + 1e-9);
        let edges: Vec<f64> = (0..=bins).map(|i| hi * i as f64 / bins as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            let idx = ((v / hi) * bins as f64) as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        Self { edges, counts }
    }
}

/// Validation summary for a trained surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub model: String,
    pub variant: String,
    pub reservoir_size: usize,
    pub per_output: Vec<OutputErrorStats>,
    /// Mean over test points, grid and outputs, percent.
    pub avg_rel_err_pct: f64,
    /// Per-point mean-of-max errors, percent (histogram source data).
    pub mean_max_per_point_pct: Vec<f64>,
    pub histogram: ErrorHistogram,
    /// The box the surrogate was trained on.
    pub space: ParameterSpace,
    pub n_train: usize,
    pub n_test: usize,
    pub reservoir_seed: u64,
    pub sampling_seed: u64,
    /// Mean wall time of one full model solve, seconds.
    pub full_solve_mean_s: f64,
    /// Mean wall time of one surrogate prediction, seconds.
    pub predict_mean_s: f64,
    /// full_solve_mean_s / predict_mean_s.
    pub speedup: f64,
    /// Error normalization convention, stated for every report.
    pub normalization: String,
    /// Error evaluation grid, stated for every report.
    pub error_grid: String,
    pub tool_version: String,
}

impl DiagnosticReport {
    /// Render the report as human-readable text.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "surrogate diagnostic report (tool {})", self.tool_version);
        let _ = writeln!(s, "  model: {}  variant: {}  reservoir size: {}",
            self.model, self.variant, self.reservoir_size);
        let _ = writeln!(s, "  trained on {} points, tested on {} Sobol points",
            self.n_train, self.n_test);
        let _ = writeln!(s, "  seeds: reservoir {}  sampling {}",
            self.reservoir_seed, self.sampling_seed);
        let _ = writeln!(s, "  trained parameter ranges:");
        for i in 0..self.space.dim() {
            let _ = writeln!(s, "    {:<12} [{}, {}] ({:?})",
                self.space.names[i], self.space.lower[i], self.space.upper[i],
                self.space.scale[i]);
        }
        let _ = writeln!(s, "  per-output relative error (%):");
        let _ = writeln!(s, "    {:<12} {:>12} {:>12}", "output", "max", "avg");
        for o in &self.per_output {
            let flag = if o.absolute_fallback { " (absolute)" } else { "" };
            let _ = writeln!(s, "    {:<12} {:>12.6} {:>12.6}{flag}",
                o.label, o.max_rel_err_pct, o.avg_rel_err_pct);
        }
        let _ = writeln!(s, "  overall avg relative error: {:.6} %", self.avg_rel_err_pct);
        let _ = writeln!(s, "  mean-of-max error histogram (%):");
        for (i, c) in self.histogram.counts.iter().enumerate() {
            let _ = writeln!(s, "    [{:>10.5}, {:>10.5}): {c}",
                self.histogram.edges[i], self.histogram.edges[i + 1]);
        }
        let _ = writeln!(s, "  timing: full solve {:.3e} s, prediction {:.3e} s, speedup {:.1}x",
            self.full_solve_mean_s, self.predict_mean_s, self.speedup);
        let _ = writeln!(s, "  normalization: {}", self.normalization);
        let _ = writeln!(s, "  error grid: {}", self.error_grid);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_sum_to_inputs() {
        let vals = [0.1, 0.2, 0.05, 0.9, 0.4, 0.41];
        let h = ErrorHistogram::from_values(&vals, 10);
        assert_eq!(h.counts.iter().sum::<usize>(), vals.len());
        assert_eq!(h.edges.len(), 11);
        assert!(h.edges[10] >= 0.9);
    }

    #[test]
    fn histogram_handles_all_zero() {
        let h = ErrorHistogram::from_values(&[0.0, 0.0], 4);
        assert_eq!(h.counts.iter().sum::<usize>(), 2);
    }
}
