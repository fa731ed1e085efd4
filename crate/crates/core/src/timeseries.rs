//! Sampled multivariate time series, cubic-spline dense evaluation, and the
//! relative-error metrics used by validation reports.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("degenerate knots: {0}")]
    DegenerateKnots(String),
    #[error("time domains do not overlap")]
    EmptyOverlap,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid trajectory: {0}")]
    Invalid(String),
    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
}

/// A sampled multivariate time series on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    /// `n_times x n_vars`
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        values: DMatrix<f64>,
        labels: Vec<String>,
    ) -> Result<Self, TimeseriesError> {
        if times.len() < 2 {
            return Err(TimeseriesError::Invalid("need at least two samples".into()));
        }
        if values.nrows() != times.len() {
            return Err(TimeseriesError::ShapeMismatch(format!(
                "{} rows vs {} times",
                values.nrows(),
                times.len()
            )));
        }
        if labels.len() != values.ncols() {
            return Err(TimeseriesError::ShapeMismatch(format!(
                "{} labels vs {} columns",
                labels.len(),
                values.ncols()
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(TimeseriesError::Invalid(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                if !values[(i, j)].is_finite() {
                    return Err(TimeseriesError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { times, values, labels })
    }

    /// Build from row-major flattened values with default labels `x0..`.
    pub fn from_flat(
        times: Vec<f64>,
        flat: Vec<f64>,
        n_times: usize,
        n_vars: usize,
    ) -> Result<Self, TimeseriesError> {
        if flat.len() != n_times * n_vars {
            return Err(TimeseriesError::ShapeMismatch(format!(
                "flat length {} != {} x {}",
                flat.len(),
                n_times,
                n_vars
            )));
        }
        let values = DMatrix::from_row_iterator(n_times, n_vars, flat);
        let labels = (0..n_vars).map(|i| format!("x{i}")).collect();
        Self::new(times, values, labels)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, TimeseriesError> {
        if labels.len() != self.values.ncols() {
            return Err(TimeseriesError::ShapeMismatch(format!(
                "{} labels vs {} columns",
                labels.len(),
                self.values.ncols()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_vars()).map(|j| self.values[(i, j)]).collect()
    }

    /// CSV with header `t,<label1>,...` and shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{}", self.times[i])?;
            for j in 0..self.n_vars() {
                write!(w, ",{}", self.values[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, TimeseriesError> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| TimeseriesError::CsvParse { line: 1, msg: "empty file".into() })?;
        let header = header.map_err(|e| TimeseriesError::CsvParse { line: 1, msg: e.to_string() })?;
        let mut cols = header.split(',');
        if cols.next() != Some("t") {
            return Err(TimeseriesError::CsvParse { line: 1, msg: "header must start with t".into() });
        }
        let labels: Vec<String> = cols.map(str::to_string).collect();
        let mut times = Vec::new();
        let mut flat = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| TimeseriesError::CsvParse { line: idx + 1, msg: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let t: f64 = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|e| TimeseriesError::CsvParse { line: idx + 1, msg: format!("{e}") })?;
            times.push(t);
            let mut count = 0;
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|e| TimeseriesError::CsvParse { line: idx + 1, msg: format!("{e}") })?;
                flat.push(v);
                count += 1;
            }
            if count != labels.len() {
                return Err(TimeseriesError::CsvParse {
                    line: idx + 1,
                    msg: format!("expected {} fields, got {count}", labels.len()),
                });
            }
        }
        let n = times.len();
        let values = DMatrix::from_row_iterator(n, labels.len(), flat);
        Self::new(times, values, labels)
    }

    /// Fit natural cubic splines to every variable.
    pub fn to_spline(&self) -> Result<SplineSeries, TimeseriesError> {
        fit_cubic_spline(self)
    }
}

/// Per-variable natural cubic splines over a shared knot grid.
#[derive(Debug, Clone)]
pub struct SplineSeries {
    knots: Vec<f64>,
    values: DMatrix<f64>,
    /// Second derivatives at the knots (zero at both ends).
    second: DMatrix<f64>,
    labels: Vec<String>,
}

/// Fit a natural cubic spline (second derivative zero at both ends) to every
/// variable of the trajectory. Interpolates all knots exactly.
pub fn fit_cubic_spline(traj: &Trajectory) -> Result<SplineSeries, TimeseriesError> {
    let n = traj.len();
    if n < 2 {
        return Err(TimeseriesError::DegenerateKnots("fewer than two points".into()));
    }
    for w in traj.times().windows(2) {
        if w[1] <= w[0] {
            return Err(TimeseriesError::DegenerateKnots(format!("duplicate time {}", w[0])));
        }
    }
    let xs = traj.times();
    let nv = traj.n_vars();
    let mut second = DMatrix::<f64>::zeros(n, nv);
    // Tridiagonal sweep per variable (shared geometry across variables).
    let mut u = vec![0.0; n];
    for v in 0..nv {
        for s in second.column_mut(v).iter_mut() {
            *s = 0.0;
        }
        u[0] = 0.0;
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * second[(i - 1, v)] + 2.0;
            second[(i, v)] = (sig - 1.0) / p;
            let dy1 = (traj.values[(i + 1, v)] - traj.values[(i, v)]) / (xs[i + 1] - xs[i]);
            let dy0 = (traj.values[(i, v)] - traj.values[(i - 1, v)]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * (dy1 - dy0) / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        second[(n - 1, v)] = 0.0;
        for k in (1..n - 1).rev() {
            let s = second[(k, v)] * second[(k + 1, v)] + u[k];
            second[(k, v)] = s;
        }
        second[(0, v)] = 0.0;
    }
    Ok(SplineSeries {
        knots: xs.to_vec(),
        values: traj.values.clone(),
        second,
        labels: traj.labels.clone(),
    })
}

impl SplineSeries {
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &DMatrix<f64> {
        &self.values
    }

    fn segment(&self, t: f64) -> usize {
        // index i such that knots[i] <= t < knots[i+1], clamped to valid range
        match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.knots.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.knots.len() - 2),
        }
    }

    /// Evaluate all variables at `t`, clamping outside the domain.
    /// Returns `true` when `t` was clamped (extrapolation flag).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> bool {
        let (lo, hi) = self.domain();
        let clamped = t < lo || t > hi;
        let tc = t.clamp(lo, hi);
        let i = self.segment(tc);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - tc) / h;
        let b = (tc - self.knots[i]) / h;
        let c = (a * a * a - a) * h * h / 6.0;
        let d = (b * b * b - b) * h * h / 6.0;
        for v in 0..self.n_vars() {
            out[v] = a * self.values[(i, v)]
                + b * self.values[(i + 1, v)]
                + c * self.second[(i, v)]
                + d * self.second[(i + 1, v)];
        }
        clamped
    }

    pub fn eval(&self, t: f64) -> (Vec<f64>, bool) {
        let mut out = vec![0.0; self.n_vars()];
        let clamped = self.eval_into(t, &mut out);
        (out, clamped)
    }

    /// Evaluate one variable at `t` (clamped).
    pub fn eval_var(&self, t: f64, var: usize) -> f64 {
        let (lo, hi) = self.domain();
        let tc = t.clamp(lo, hi);
        let i = self.segment(tc);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - tc) / h;
        let b = (tc - self.knots[i]) / h;
        a * self.values[(i, var)]
            + b * self.values[(i + 1, var)]
            + ((a * a * a - a) * self.second[(i, var)] + (b * b * b - b) * self.second[(i + 1, var)])
                * h
                * h
                / 6.0
    }

    /// Sample the spline on a time grid as a Trajectory.
    pub fn sample(&self, times: &[f64]) -> Result<Trajectory, TimeseriesError> {
        let mut values = DMatrix::zeros(times.len(), self.n_vars());
        let mut row = vec![0.0; self.n_vars()];
        for (i, &t) in times.iter().enumerate() {
            self.eval_into(t, &mut row);
            for (v, &x) in row.iter().enumerate() {
                values[(i, v)] = x;
            }
        }
        Trajectory::new(times.to_vec(), values, self.labels.to_vec())
    }
}

/// Evaluate a spline at `t` (clamped to the domain, flag set on clamp).
pub fn eval_spline(s: &SplineSeries, t: f64) -> (Vec<f64>, bool) {
    s.eval(t)
}

/// Spacing rule for the error-evaluation time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpacing {
    Uniform,
    LogUniform,
}

/// The time grid on which relative errors are evaluated.
#[derive(Debug, Clone)]
pub struct ErrorGrid {
    pub n_points: usize,
    pub spacing: GridSpacing,
    /// Explicit domain override; intersected with the common domain.
    pub domain: Option<(f64, f64)>,
}

impl ErrorGrid {
    pub fn uniform(n_points: usize) -> Self {
        Self { n_points, spacing: GridSpacing::Uniform, domain: None }
    }

    pub fn log_uniform(n_points: usize, lo: f64, hi: f64) -> Self {
        Self { n_points, spacing: GridSpacing::LogUniform, domain: Some((lo, hi)) }
    }

    pub fn describe(&self) -> String {
        let sp = match self.spacing {
            GridSpacing::Uniform => "uniform",
            GridSpacing::LogUniform => "log-uniform",
        };
        match self.domain {
            Some((lo, hi)) => format!("{} points, {sp} over [{lo:e}, {hi:e}]", self.n_points),
            None => format!("{} points, {sp} over the common domain", self.n_points),
        }
    }

    fn build(&self, common: (f64, f64)) -> Result<Vec<f64>, TimeseriesError> {
        let (mut lo, mut hi) = common;
        if let Some((dlo, dhi)) = self.domain {
            lo = lo.max(dlo);
            hi = hi.min(dhi);
        }
        if !(hi > lo) {
            return Err(TimeseriesError::EmptyOverlap);
        }
        let n = self.n_points.max(2);
        let mut times = Vec::with_capacity(n);
        match self.spacing {
            GridSpacing::Uniform => {
                for j in 0..n {
                    times.push(lo + (hi - lo) * j as f64 / (n - 1) as f64);
                }
            }
            GridSpacing::LogUniform => {
                if lo <= 0.0 {
                    return Err(TimeseriesError::Invalid(
                        "log-uniform error grid needs a positive lower bound".into(),
                    ));
                }
                let (llo, lhi) = (lo.ln(), hi.ln());
                for j in 0..n {
                    times.push((llo + (lhi - llo) * j as f64 / (n - 1) as f64).exp());
                }
            }
        }
        Ok(times)
    }
}

/// Pointwise relative errors of `pred` against `truth` on an evaluation grid.
///
/// Per variable v the error at grid time t_j is
/// `|pred_v(t_j) - truth_v(t_j)| / max_j |truth_v(t_j)|` — a sup-norm scale
/// rather than pointwise normalization, so near-zero crossings of the truth
/// signal do not blow the metric up. Variables whose truth signal is
/// identically zero on the grid fall back to absolute error and are flagged.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    /// `n_points x n_vars`, as fractions (multiply by 100 for percent).
    pub errors: DMatrix<f64>,
    /// Per-variable flag: scale was zero, absolute error reported.
    pub absolute_fallback: Vec<bool>,
}

impl ErrorSeries {
    /// Maximum over time, per variable.
    pub fn max_per_var(&self) -> Vec<f64> {
        (0..self.errors.ncols())
            .map(|v| self.errors.column(v).iter().cloned().fold(0.0, f64::max))
            .collect()
    }

    /// Mean over time, per variable.
    pub fn avg_per_var(&self) -> Vec<f64> {
        (0..self.errors.ncols())
            .map(|v| self.errors.column(v).sum() / self.errors.nrows() as f64)
            .collect()
    }

    /// Mean over both time and variables.
    pub fn avg(&self) -> f64 {
        self.errors.sum() / (self.errors.nrows() * self.errors.ncols()) as f64
    }
}

pub fn relative_error_series(
    pred: &SplineSeries,
    truth: &SplineSeries,
    grid: &ErrorGrid,
) -> Result<ErrorSeries, TimeseriesError> {
    if pred.n_vars() != truth.n_vars() {
        return Err(TimeseriesError::ShapeMismatch(format!(
            "{} vs {} variables",
            pred.n_vars(),
            truth.n_vars()
        )));
    }
    let (plo, phi) = pred.domain();
    let (tlo, thi) = truth.domain();
    let common = (plo.max(tlo), phi.min(thi));
    if !(common.1 > common.0) {
        return Err(TimeseriesError::EmptyOverlap);
    }
    let times = grid.build(common)?;
    let nv = pred.n_vars();
    let n = times.len();
    let mut pv = DMatrix::zeros(n, nv);
    let mut tv = DMatrix::zeros(n, nv);
    let mut row = vec![0.0; nv];
    for (j, &t) in times.iter().enumerate() {
        pred.eval_into(t, &mut row);
        for v in 0..nv {
            pv[(j, v)] = row[v];
        }
        truth.eval_into(t, &mut row);
        for v in 0..nv {
            tv[(j, v)] = row[v];
        }
    }
    let mut errors = DMatrix::zeros(n, nv);
    let mut absolute_fallback = vec![false; nv];
    for v in 0..nv {
        let scale = tv.column(v).iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            absolute_fallback[v] = true;
            for j in 0..n {
                errors[(j, v)] = (pv[(j, v)] - tv[(j, v)]).abs();
            }
        } else {
            for j in 0..n {
                errors[(j, v)] = (pv[(j, v)] - tv[(j, v)]).abs() / scale;
            }
        }
    }
    Ok(ErrorSeries { times, errors, absolute_fallback })
}

/// Maximum relative error over the grid, per variable (fraction).
pub fn max_rel_error(
    pred: &SplineSeries,
    truth: &SplineSeries,
    grid: &ErrorGrid,
) -> Result<Vec<f64>, TimeseriesError> {
    Ok(relative_error_series(pred, truth, grid)?.max_per_var())
}

/// Mean relative error over grid and variables (fraction).
pub fn avg_rel_error(
    pred: &SplineSeries,
    truth: &SplineSeries,
    grid: &ErrorGrid,
) -> Result<f64, TimeseriesError> {
    Ok(relative_error_series(pred, truth, grid)?.avg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn traj_of(f: impl Fn(f64) -> f64, times: &[f64]) -> Trajectory {
        let values = DMatrix::from_iterator(times.len(), 1, times.iter().map(|&t| f(t)));
        Trajectory::new(times.to_vec(), values, vec!["y".into()]).unwrap()
    }

    #[test]
    fn spline_reproduces_linear_data() {
        let traj = traj_of(|t| t, &[0.0, 1.0, 2.0]);
        let s = traj.to_spline().unwrap();
        let (v, clamped) = s.eval(0.5);
        assert!(!clamped);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn spline_cubic_midpoint_accuracy() {
        // Closed-form oracle f(t) = t^3 on 50 uniform knots. The natural
        // boundary condition forces s'' = 0 at t = 1 where f'' = 6, so the
        // error is concentrated in the last segments (1.1434e-4 max, cross
        // checked against an independent natural-spline implementation) and
        // decays geometrically toward the interior.
        let times: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let traj = traj_of(|t| t * t * t, &times);
        let s = traj.to_spline().unwrap();
        let errs: Vec<f64> = times
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (s.eval(mid).0[0] - mid.powi(3)).abs()
            })
            .collect();
        let max = errs.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 1.2e-4, "max midpoint err {max:e}");
        // away from the ends the cubic data is reproduced almost exactly
        let interior = errs[15..35].iter().cloned().fold(0.0, f64::max);
        assert!(interior <= 1e-11, "interior err {interior:e}");
    }

    #[test]
    fn spline_exact_at_knots() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
        let traj = traj_of(|t| (t * 1.3).sin() * 2.0 + 0.5, &times);
        let s = traj.to_spline().unwrap();
        for (i, &t) in times.iter().enumerate() {
            let (v, clamped) = s.eval(t);
            assert!(!clamped);
            let expect = traj.values()[(i, 0)];
            assert!(
                (v[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                "knot {i}: {} vs {expect}",
                v[0]
            );
        }
    }

    #[test]
    fn spline_clamps_outside_domain() {
        let traj = traj_of(|t| 2.0 * t + 1.0, &[0.0, 1.0, 2.0]);
        let s = traj.to_spline().unwrap();
        let (v, clamped) = s.eval(-1.0);
        assert!(clamped);
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-14);
        let (v, clamped) = s.eval(5.0);
        assert!(clamped);
        assert_abs_diff_eq!(v[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn spline_rejects_degenerate_knots() {
        let values = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        // duplicate times are rejected by the Trajectory constructor already
        assert!(Trajectory::new(vec![1.0, 1.0], values, vec!["y".into()]).is_err());
    }

    #[test]
    fn relative_error_identical_is_zero() {
        let times: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let traj = traj_of(|t| (t * 0.2).cos(), &times);
        let s = traj.to_spline().unwrap();
        let e = relative_error_series(&s, &s, &ErrorGrid::uniform(100)).unwrap();
        assert_eq!(e.avg(), 0.0);
        assert!(e.max_per_var().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn relative_error_constant_offset() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let truth = traj_of(|_| 2.0, &times).to_spline().unwrap();
        let pred = traj_of(|_| 2.02, &times).to_spline().unwrap();
        let e = relative_error_series(&pred, &truth, &ErrorGrid::uniform(100)).unwrap();
        for j in 0..100 {
            assert_abs_diff_eq!(e.errors[(j, 0)], 0.01, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(e.avg(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn max_and_avg_reductions() {
        // error 1% at exactly one of 1000 grid points, 0 elsewhere
        let n = 1000;
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let truth = traj_of(|_| 1.0, &times).to_spline().unwrap();
        let mut vals: Vec<f64> = vec![1.0; n];
        vals[500] = 1.01;
        let values = DMatrix::from_iterator(n, 1, vals.iter().cloned());
        let pred = Trajectory::new(times.clone(), values, vec!["y".into()])
            .unwrap()
            .to_spline()
            .unwrap();
        // grid aligned with the knots so the bump is sampled exactly once
        let grid = ErrorGrid::uniform(n);
        let maxes = max_rel_error(&pred, &truth, &grid).unwrap();
        let avg = avg_rel_error(&pred, &truth, &grid).unwrap();
        assert_abs_diff_eq!(maxes[0], 0.01, epsilon = 1e-9);
        assert_abs_diff_eq!(avg, 0.00001, epsilon = 1e-7);
        assert!(maxes[0] >= avg);
    }

    #[test]
    fn zero_signal_falls_back_to_absolute() {
        let times: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let truth = traj_of(|_| 0.0, &times).to_spline().unwrap();
        let pred = traj_of(|_| 0.5, &times).to_spline().unwrap();
        let e = relative_error_series(&pred, &truth, &ErrorGrid::uniform(10)).unwrap();
        assert!(e.absolute_fallback[0]);
        assert_abs_diff_eq!(e.errors[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn empty_overlap_detected() {
        let a = traj_of(|t| t, &[0.0, 1.0]).to_spline().unwrap();
        let b = traj_of(|t| t, &[2.0, 3.0]).to_spline().unwrap();
        assert!(matches!(
            relative_error_series(&a, &b, &ErrorGrid::uniform(10)),
            Err(TimeseriesError::EmptyOverlap)
        ));
    }

    #[test]
    fn csv_round_trip_exact() {
        let times = vec![0.0, 0.1, 0.2, 1.0 / 3.0];
        let values = DMatrix::from_row_slice(4, 2, &[
            1.0,
            -2.5e-7,
            std::f64::consts::PI,
            1e30,
            -1.0 / 3.0,
            6.02e23,
            0.1 + 0.2,
            f64::MIN_POSITIVE,
        ]);
        let traj = Trajectory::new(times, values, vec!["a".into(), "b".into()]).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        assert_eq!(traj, back);
    }

    #[test]
    fn log_uniform_grid_spacing() {
        let times: Vec<f64> = (0..40).map(|i| 10f64.powf(-5.0 + 10.0 * i as f64 / 39.0)).collect();
        let traj = traj_of(|t| t.ln(), &times);
        let s = traj.to_spline().unwrap();
        let e =
            relative_error_series(&s, &s, &ErrorGrid::log_uniform(100, 1e-5, 1e5)).unwrap();
        assert_abs_diff_eq!(e.times[0], 1e-5, epsilon = 1e-18);
        assert_abs_diff_eq!(*e.times.last().unwrap(), 1e5, epsilon = 1e-6);
        // ratios between consecutive grid times are constant
        let r0 = e.times[1] / e.times[0];
        let r1 = e.times[51] / e.times[50];
        assert_abs_diff_eq!(r0, r1, epsilon = 1e-9);
    }
}
