//! Truncated-SVD minimum-norm least squares, shared by the LP projection
//! solve and the NP shared-center fits. The decomposition of the feature
//! matrix is computed once and reused across all training points.

use nalgebra::DMatrix;

use super::TrainError;

/// Pseudoinverse solver built from one SVD with relative truncation.
pub struct SvdSolver {
    u: DMatrix<f64>,
    inv_s: Vec<f64>,
    v_t: DMatrix<f64>,
    rank: usize,
}

impl SvdSolver {
    /// Decompose `a` once; singular values below `rcond * sigma_max` are
    /// truncated when solving.
    pub fn new(a: &DMatrix<f64>, rcond: f64) -> Result<Self, TrainError> {
        let svd = a.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| TrainError::InvalidInput("svd failed to produce U".into()))?;
        let v_t =
            svd.v_t.ok_or_else(|| TrainError::InvalidInput("svd failed to produce V^T".into()))?;
        let s = svd.singular_values;
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let cutoff = rcond * smax;
        let mut inv_s = vec![0.0; s.len()];
        let mut rank = 0;
        for (i, &sv) in s.iter().enumerate() {
            if sv > cutoff && sv > 0.0 {
                inv_s[i] = 1.0 / sv;
                rank += 1;
            }
        }
        Ok(Self { u, inv_s, v_t, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Minimum-norm least-squares solution of `A w = b` for every column of
    /// `b`: `w = V diag(1/sigma) U^T b` with truncated directions dropped.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = self.u.transpose() * b;
        for (i, &inv) in self.inv_s.iter().enumerate() {
            for j in 0..c.ncols() {
                c[(i, j)] *= inv;
            }
        }
        self.v_t.transpose() * c
    }
}

/// Minimum-norm least-squares solution `W_out` of `W_out r(t) = x(t)` over
/// the save points: rows of `r_mat` are reservoir states (`n_t x n_r`), rows
/// of `x_mat` are targets (`n_t x n_out`). Returns `W_out` as `n_out x n_r`
/// (so `W_out^T = pinv(R) X`).
pub fn svd_least_squares(
    r_mat: &DMatrix<f64>,
    x_mat: &DMatrix<f64>,
    rcond: f64,
) -> Result<DMatrix<f64>, TrainError> {
    if r_mat.nrows() != x_mat.nrows() {
        return Err(TrainError::InvalidInput(format!(
            "shape mismatch: {} reservoir rows vs {} target rows",
            r_mat.nrows(),
            x_mat.nrows()
        )));
    }
    let solver = SvdSolver::new(r_mat, rcond)?;
    Ok(solver.solve(x_mat).transpose())
}
