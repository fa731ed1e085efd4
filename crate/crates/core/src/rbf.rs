//! Vector-valued radial basis function interpolation with a linear
//! polynomial tail.
//!
//! Solves the standard saddle-point system
//!
//! ```text
//! [ K + ridge*I   P ] [w]   [Y]
//! [ P^T           0 ] [c] = [0]
//! ```
//!
//! where `K_ij = phi(|x_i - x_j|)` and `P = [x | 1]`, after an affine
//! normalization of every input dimension to [0, 1]. The tail makes affine
//! data reproduced exactly and keeps the thin-plate kernel well-posed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RbfError {
    #[error("singular interpolation system: rows {0} and {1} are (near-)duplicates")]
    SingularSystem(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {need} rows for input dimension {dim}, got {got}")]
    TooFewRows { need: usize, dim: usize, got: usize },
}

/// Radial kernel. Thin-plate is shape-parameter-free and the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "epsilon")]
pub enum Kernel {
    ThinPlate,
    Gaussian(f64),
    InverseMultiquadric(f64),
}

impl Kernel {
    /// Kernel value from the squared distance (avoids a sqrt for thin-plate).
    #[inline]
    pub fn phi_sq(&self, r2: f64) -> f64 {
        match *self {
            // r^2 ln r = 0.5 r^2 ln r^2, with phi(0) = 0
            Kernel::ThinPlate => {
                if r2 <= 0.0 {
                    0.0
                } else {
                    0.5 * r2 * r2.ln()
                }
            }
            Kernel::Gaussian(eps) => (-eps * eps * r2).exp(),
            Kernel::InverseMultiquadric(eps) => 1.0 / (1.0 + eps * eps * r2).sqrt(),
        }
    }

    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        self.phi_sq(r * r)
    }
}

/// Default ridge on the kernel block; guards against near-duplicate samples.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// A fitted vector-valued RBF interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfInterpolant {
    /// Centers in normalized coordinates, `k x d_in`.
    centers: DMatrix<f64>,
    /// `(k + d_in + 1) x d_out`: kernel weights, then linear tail, then constant.
    weights: DMatrix<f64>,
    kernel: Kernel,
    /// Input normalization: x_norm = (x - lo) / width per dimension.
    norm_lo: Vec<f64>,
    norm_width: Vec<f64>,
}

/// Fit an interpolant through `(X, Y)`, `X: k x d_in`, `Y: k x d_out`.
pub fn fit_rbf(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    kernel: Kernel,
    ridge: f64,
) -> Result<RbfInterpolant, RbfError> {
    let k = x.nrows();
    let d = x.ncols();
    if y.nrows() != k {
        return Err(RbfError::ShapeMismatch(format!(
            "{} input rows vs {} output rows",
            k,
            y.nrows()
        )));
    }
    if k < d + 2 {
        return Err(RbfError::TooFewRows { need: d + 2, dim: d, got: k });
    }

    // normalization to the unit box from the training bounding box
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..k {
        for j in 0..d {
            lo[j] = lo[j].min(x[(i, j)]);
            hi[j] = hi[j].max(x[(i, j)]);
        }
    }
    let width: Vec<f64> = (0..d)
        .map(|j| {
            let w = hi[j] - lo[j];
            if w > 0.0 {
                w
            } else {
                1.0 // constant dimension: maps to 0
            }
        })
        .collect();

    let mut centers = DMatrix::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            centers[(i, j)] = (x[(i, j)] - lo[j]) / width[j];
        }
    }

    // duplicate detection in normalized coordinates
    let mut min_d2 = f64::INFINITY;
    let mut min_pair = (0usize, 0usize);
    for i in 0..k {
        for j in (i + 1)..k {
            let mut d2 = 0.0;
            for c in 0..d {
                let diff = centers[(i, c)] - centers[(j, c)];
                d2 += diff * diff;
            }
            if d2 < min_d2 {
                min_d2 = d2;
                min_pair = (i, j);
            }
        }
    }
    if min_d2 < 1e-24 {
        return Err(RbfError::SingularSystem(min_pair.0, min_pair.1));
    }

    let m = k + d + 1;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..k {
        for j in 0..k {
            let mut d2 = 0.0;
            for c in 0..d {
                let diff = centers[(i, c)] - centers[(j, c)];
                d2 += diff * diff;
            }
            a[(i, j)] = kernel.phi_sq(d2);
        }
        a[(i, i)] += ridge;
        for c in 0..d {
            a[(i, k + c)] = centers[(i, c)];
            a[(k + c, i)] = centers[(i, c)];
        }
        a[(i, k + d)] = 1.0;
        a[(k + d, i)] = 1.0;
    }

    let d_out = y.ncols();
    let mut rhs = DMatrix::zeros(m, d_out);
    for i in 0..k {
        for o in 0..d_out {
            rhs[(i, o)] = y[(i, o)];
        }
    }

    let lu = a.full_piv_lu();
    let weights = lu
        .solve(&rhs)
        .ok_or(RbfError::SingularSystem(min_pair.0, min_pair.1))?;

    Ok(RbfInterpolant { centers, weights, kernel, norm_lo: lo, norm_width: width })
}

impl RbfInterpolant {
    pub fn d_in(&self) -> usize {
        self.centers.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_centers(&self) -> usize {
        self.centers.nrows()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Kernel-block weight matrix Frobenius norm (diagnostics, ridge studies).
    pub fn kernel_weight_norm(&self) -> f64 {
        let k = self.n_centers();
        let mut acc = 0.0;
        for i in 0..k {
            for o in 0..self.d_out() {
                acc += self.weights[(i, o)] * self.weights[(i, o)];
            }
        }
        acc.sqrt()
    }

    /// Max |P^T w| entry: the polynomial-tail orthogonality residual.
    pub fn tail_orthogonality_residual(&self) -> f64 {
        let k = self.n_centers();
        let d = self.d_in();
        let mut worst: f64 = 0.0;
        for o in 0..self.d_out() {
            for c in 0..=d {
                let mut acc = 0.0;
                for i in 0..k {
                    let p = if c < d { self.centers[(i, c)] } else { 1.0 };
                    acc += p * self.weights[(i, o)];
                }
                worst = worst.max(acc.abs());
            }
        }
        worst
    }

    /// True when `x` lies outside the training bounding box (extrapolation).
    pub fn is_extrapolating(&self, x: &[f64]) -> bool {
        (0..self.d_in()).any(|j| {
            let u = (x[j] - self.norm_lo[j]) / self.norm_width[j];
            !(-1e-12..=1.0 + 1e-12).contains(&u)
        })
    }

    /// Evaluate at `x` (physical coordinates), writing `d_out` values.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.n_centers();
        let d = self.d_in();
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), self.d_out());
        let u: Vec<f64> = (0..d).map(|j| (x[j] - self.norm_lo[j]) / self.norm_width[j]).collect();
        out.fill(0.0);
        for i in 0..k {
            let mut d2 = 0.0;
            for c in 0..d {
                let diff = u[c] - self.centers[(i, c)];
                d2 += diff * diff;
            }
            let phi = self.kernel.phi_sq(d2);
            for o in 0..out.len() {
                out[o] += phi * self.weights[(i, o)];
            }
        }
        for c in 0..d {
            for o in 0..out.len() {
                out[o] += u[c] * self.weights[(k + c, o)];
            }
        }
        for o in 0..out.len() {
            out[o] += self.weights[(k + d, o)];
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d_out()];
        self.eval_into(x, &mut out);
        out
    }

    /// Evaluate plus the extrapolation flag.
    pub fn eval_with_flag(&self, x: &[f64]) -> (Vec<f64>, bool) {
        (self.eval(x), self.is_extrapolating(x))
    }

    // serialization accessors
    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn norm(&self) -> (&[f64], &[f64]) {
        (&self.norm_lo, &self.norm_width)
    }

    pub fn from_parts(
        centers: DMatrix<f64>,
        weights: DMatrix<f64>,
        kernel: Kernel,
        norm_lo: Vec<f64>,
        norm_width: Vec<f64>,
    ) -> Result<Self, RbfError> {
        if weights.nrows() != centers.nrows() + centers.ncols() + 1 {
            return Err(RbfError::ShapeMismatch(format!(
                "weights rows {} != centers {} + dim {} + 1",
                weights.nrows(),
                centers.nrows(),
                centers.ncols()
            )));
        }
        if norm_lo.len() != centers.ncols() || norm_width.len() != centers.ncols() {
            return Err(RbfError::ShapeMismatch("normalization length".into()));
        }
        Ok(Self { centers, weights, kernel, norm_lo, norm_width })
    }
}

/// Evaluate an interpolant (free-function form of [`RbfInterpolant::eval`]).
pub fn eval_rbf(m: &RbfInterpolant, x: &[f64]) -> Vec<f64> {
    m.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{latin_hypercube, ParameterSpace};

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn constant_data_reproduced_everywhere() {
        let x = mat(5, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.4, 0.6]);
        let y = mat(5, 1, &[3.5; 5]);
        let m = fit_rbf(&x, &y, Kernel::ThinPlate, 0.0).unwrap();
        for p in [[0.2, 0.9], [5.0, -3.0], [0.5, 0.5]] {
            assert!((m.eval(&p)[0] - 3.5).abs() < 1e-9, "{:?}", m.eval(&p));
        }
    }

    #[test]
    fn affine_data_reproduced_to_1e8() {
        let space = ParameterSpace::linear(&["a", "b", "c"], &[0.0; 3], &[1.0; 3]).unwrap();
        let pts = latin_hypercube(&space, 25, 3);
        let affine = |p: &[f64]| 2.0 * p[0] - 3.0 * p[1] + 0.5 * p[2] + 7.0;
        let x = DMatrix::from_fn(25, 3, |i, j| pts[i][j]);
        let y = DMatrix::from_fn(25, 1, |i, _| affine(&pts[i]));
        let m = fit_rbf(&x, &y, Kernel::ThinPlate, 0.0).unwrap();
        let probes = latin_hypercube(&space, 100, 77);
        for p in &probes {
            let got = m.eval(p)[0];
            let want = affine(p);
            assert!((got - want).abs() <= 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn interpolates_training_values() {
        let space = ParameterSpace::linear(&["a", "b"], &[0.0; 2], &[1.0; 2]).unwrap();
        let pts = latin_hypercube(&space, 30, 11);
        let f = |p: &[f64]| (2.0 * std::f64::consts::PI * p[0]).sin() * (3.0 * p[1]).cos();
        let x = DMatrix::from_fn(30, 2, |i, j| pts[i][j]);
        let y = DMatrix::from_fn(30, 1, |i, _| f(&pts[i]));
        let m = fit_rbf(&x, &y, Kernel::ThinPlate, DEFAULT_RIDGE).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let got = m.eval(p)[0];
            let want = y[(i, 0)];
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "center {i}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn tail_orthogonality_holds() {
        let space = ParameterSpace::linear(&["a", "b"], &[0.0; 2], &[1.0; 2]).unwrap();
        let pts = latin_hypercube(&space, 20, 5);
        let x = DMatrix::from_fn(20, 2, |i, j| pts[i][j]);
        let y = DMatrix::from_fn(20, 2, |i, o| (pts[i][0] * (o as f64 + 1.0)).sin());
        let m = fit_rbf(&x, &y, Kernel::ThinPlate, 0.0).unwrap();
        assert!(m.tail_orthogonality_residual() < 1e-8, "{}", m.tail_orthogonality_residual());
    }

    #[test]
    fn loo_error_beats_nearest_neighbor() {
        // Oracle: brute-force nearest-neighbor predictor on the same data.
        let space = ParameterSpace::linear(&["a", "b"], &[0.0; 2], &[1.0; 2]).unwrap();
        let pts = latin_hypercube(&space, 20, 2);
        let f = |p: &[f64]| {
            (2.0 * std::f64::consts::PI * p[0]).sin() * (2.0 * std::f64::consts::PI * p[1]).cos()
        };
        let mut rbf_err = 0.0;
        let mut nn_err = 0.0;
        for leave in 0..20 {
            let keep: Vec<&Vec<f64>> =
                pts.iter().enumerate().filter(|(i, _)| *i != leave).map(|(_, p)| p).collect();
            let x = DMatrix::from_fn(19, 2, |i, j| keep[i][j]);
            let y = DMatrix::from_fn(19, 1, |i, _| f(keep[i]));
            let m = fit_rbf(&x, &y, Kernel::ThinPlate, DEFAULT_RIDGE).unwrap();
            let target = f(&pts[leave]);
            rbf_err += (m.eval(&pts[leave])[0] - target).abs();
            let nearest = keep
                .iter()
                .min_by(|a, b| {
                    let da: f64 = a.iter().zip(&pts[leave]).map(|(x, y)| (x - y).powi(2)).sum();
                    let db: f64 = b.iter().zip(&pts[leave]).map(|(x, y)| (x - y).powi(2)).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            nn_err += (f(nearest) - target).abs();
        }
        assert!(rbf_err < nn_err, "rbf {rbf_err} vs nn {nn_err}");
    }

    #[test]
    fn hand_solved_1d_system_matches() {
        // Three centers in 1D, thin-plate with degree-1 tail: 5x5 saddle
        // system solved here by hand-coded Gaussian elimination as the oracle.
        let xs = [0.0, 0.5, 1.0];
        let ys = [1.0, -1.0, 2.0];
        let phi = |a: f64, b: f64| {
            let r = (a - b).abs();
            if r == 0.0 {
                0.0
            } else {
                r * r * r.ln()
            }
        };
        let mut a = [[0.0f64; 5]; 5];
        let mut b = [0.0f64; 5];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = phi(xs[i], xs[j]);
            }
            a[i][3] = xs[i];
            a[3][i] = xs[i];
            a[i][4] = 1.0;
            a[4][i] = 1.0;
            b[i] = ys[i];
        }
        // Gaussian elimination with partial pivoting
        let mut aug = [[0.0f64; 6]; 5];
        for i in 0..5 {
            aug[i][..5].copy_from_slice(&a[i]);
            aug[i][5] = b[i];
        }
        for col in 0..5 {
            let piv = (col..5)
                .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, piv);
            for row in (col + 1)..5 {
                let f = aug[row][col] / aug[col][col];
                for c in col..6 {
                    aug[row][c] -= f * aug[col][c];
                }
            }
        }
        let mut sol = [0.0f64; 5];
        for row in (0..5).rev() {
            let mut acc = aug[row][5];
            for c in (row + 1)..5 {
                acc -= aug[row][c] * sol[c];
            }
            sol[row] = acc / aug[row][row];
        }
        let manual_eval = |x: f64| {
            sol[0] * phi(x, xs[0]) + sol[1] * phi(x, xs[1]) + sol[2] * phi(x, xs[2])
                + sol[3] * x
                + sol[4]
        };

        let xm = mat(3, 1, &xs);
        let ym = mat(3, 1, &ys);
        let m = fit_rbf(&xm, &ym, Kernel::ThinPlate, 0.0).unwrap();
        // centers span [0,1] so normalized == physical coordinates here
        for x in [0.0, 0.1, 0.25, 0.5, 0.77, 1.0] {
            let got = m.eval(&[x])[0];
            let want = manual_eval(x);
            assert!((got - want).abs() < 1e-10, "at {x}: {got} vs {want}");
        }
    }

    #[test]
    fn permutation_invariance() {
        let space = ParameterSpace::linear(&["a", "b"], &[0.0; 2], &[1.0; 2]).unwrap();
        let pts = latin_hypercube(&space, 18, 8);
        let f = |p: &[f64]| (p[0] * 3.0).sin() + p[1] * p[1];
        let x = DMatrix::from_fn(18, 2, |i, j| pts[i][j]);
        let y = DMatrix::from_fn(18, 1, |i, _| f(&pts[i]));
        let m1 = fit_rbf(&x, &y, Kernel::ThinPlate, 0.0).unwrap();
        let xp = DMatrix::from_fn(18, 2, |i, j| pts[17 - i][j]);
        let yp = DMatrix::from_fn(18, 1, |i, _| f(&pts[17 - i]));
        let m2 = fit_rbf(&xp, &yp, Kernel::ThinPlate, 0.0).unwrap();
        for probe in latin_hypercube(&space, 50, 99) {
            let a = m1.eval(&probe)[0];
            let b = m2.eval(&probe)[0];
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn ridge_monotonically_shrinks_weights() {
        let space = ParameterSpace::linear(&["a", "b"], &[0.0; 2], &[1.0; 2]).unwrap();
        let pts = latin_hypercube(&space, 25, 4);
        let f = |p: &[f64]| (7.0 * p[0]).sin() * (5.0 * p[1]).sin();
        let x = DMatrix::from_fn(25, 2, |i, j| pts[i][j]);
        let y = DMatrix::from_fn(25, 1, |i, _| f(&pts[i]));
        let mut prev = f64::INFINITY;
        for ridge in [0.0, 1e-10, 1e-6, 1e-3, 1e-1] {
            let m = fit_rbf(&x, &y, Kernel::ThinPlate, ridge).unwrap();
            let norm = m.kernel_weight_norm();
            assert!(norm <= prev * (1.0 + 1e-9), "ridge {ridge}: {norm} > {prev}");
            prev = norm;
        }
    }

    #[test]
    fn duplicate_centers_rejected_with_pair() {
        let x = mat(5, 1, &[0.0, 0.25, 0.5, 0.25, 1.0]);
        let y = mat(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        match fit_rbf(&x, &y, Kernel::ThinPlate, 0.0) {
            Err(RbfError::SingularSystem(i, j)) => assert_eq!((i, j), (1, 3)),
            other => panic!("expected SingularSystem, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_rejected() {
        let x = mat(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let y = mat(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            fit_rbf(&x, &y, Kernel::ThinPlate, 0.0),
            Err(RbfError::TooFewRows { .. })
        ));
    }

    #[test]
    fn extrapolation_flag() {
        let x = mat(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = mat(4, 1, &[0.0, 1.0, 4.0, 9.0]);
        let m = fit_rbf(&x, &y, Kernel::ThinPlate, 0.0).unwrap();
        assert!(!m.is_extrapolating(&[1.5]));
        assert!(m.is_extrapolating(&[3.5]));
        let (_, flag) = m.eval_with_flag(&[-0.1]);
        assert!(flag);
    }

    #[test]
    fn gaussian_kernel_interpolates() {
        let x = mat(6, 1, &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        let y = DMatrix::from_fn(6, 1, |i, _| (x[(i, 0)] * 4.0).sin());
        let m = fit_rbf(&x, &y, Kernel::Gaussian(2.0), 0.0).unwrap();
        for i in 0..6 {
            assert!((m.eval(&[x[(i, 0)]])[0] - y[(i, 0)]).abs() < 1e-8);
        }
    }

    proptest::proptest! {
        #[test]
        fn affine_reproduction_random_coefficients(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0
        ) {
            let space = ParameterSpace::linear(&["x", "y"], &[0.0; 2], &[1.0; 2]).unwrap();
            let pts = latin_hypercube(&space, 15, 13);
            let x = DMatrix::from_fn(15, 2, |i, j| pts[i][j]);
            let y = DMatrix::from_fn(15, 1, |i, _| a * pts[i][0] + b * pts[i][1] + c);
            let m = fit_rbf(&x, &y, Kernel::ThinPlate, 0.0).unwrap();
            for p in latin_hypercube(&space, 20, 14) {
                let want = a * p[0] + b * p[1] + c;
                let got = m.eval(&p)[0];
                proptest::prop_assert!((got - want).abs() <= 1e-8 * (1.0 + want.abs()));
            }
        }
    }
}
