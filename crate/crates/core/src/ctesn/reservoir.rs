//! Reservoir construction and simulation.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ReservoirMatrices, ReservoirSpec, SparseRows, TrainError};
use crate::integrators::{solve_explicit, IntegrateError, OdeProblem, SolveOptions};
use crate::timeseries::{SplineSeries, Trajectory};

/// Build the reservoir pair `(A, W_hyb)` from the spec.
///
/// A gets i.i.d. uniform [-1, 1] entries on a seeded Bernoulli sparsity
/// pattern and is rescaled so its spectral radius hits the target (verified
/// to 1%); W_hyb is dense uniform [-input_scale, input_scale]. An all-zero
/// or nilpotent draw is retried once with a fresh seed before failing.
pub fn build_reservoir(
    spec: &ReservoirSpec,
    n_in: usize,
) -> Result<ReservoirMatrices, TrainError> {
    spec.validate()?;
    if n_in < 1 {
        return Err(TrainError::InvalidInput("model dimension must be at least 1".into()));
    }
    match try_build(spec, n_in, spec.seed) {
        Ok(m) => Ok(m),
        Err(TrainError::ZeroSpectralRadius { .. }) => {
            try_build(spec, n_in, spec.seed.wrapping_add(1))
        }
        Err(e) => Err(e),
    }
}

fn try_build(
    spec: &ReservoirSpec,
    n_in: usize,
    seed: u64,
) -> Result<ReservoirMatrices, TrainError> {
    let n = spec.n_r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::new();
        for j in 0..n {
            // order matters for determinism: one draw per slot, value drawn
            // only for occupied slots
            if rng.random::<f64>() < spec.density {
                row.push((j as u32, rng.random_range(-1.0..1.0)));
            }
        }
        rows.push(row);
    }
    let mut a = SparseRows { n, rows };

    let rho = estimate_spectral_radius(&a);
    if !(rho > 1e-14) {
        return Err(TrainError::ZeroSpectralRadius { n_r: n, density: spec.density });
    }
    a.scale(spec.spectral_radius / rho);
    let realized = estimate_spectral_radius(&a);
    if (realized - spec.spectral_radius).abs() > 0.01 * spec.spectral_radius {
        return Err(TrainError::InvalidInput(format!(
            "spectral radius rescale missed target: {realized} vs {}",
            spec.spectral_radius
        )));
    }

    let w_hyb = if spec.input_scale > 0.0 {
        DMatrix::from_fn(n, n_in, |_, _| rng.random_range(-spec.input_scale..spec.input_scale))
    } else {
        DMatrix::zeros(n, n_in)
    };

    Ok(ReservoirMatrices { a, w_hyb, r0: vec![0.0; n], realized_rho: realized })
}

/// Dominant eigenvalue magnitude of a sparse matrix via Arnoldi iteration
/// with a small Krylov subspace (exact for n <= the subspace size).
fn estimate_spectral_radius(a: &SparseRows) -> f64 {
    let n = a.n;
    if n == 0 {
        return 0.0;
    }
    let k = n.min(40);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut h = DMatrix::<f64>::zeros(k + 1, k);
    // enrich the start vector toward the dominant subspace first
    let mut v0 = vec![1.0 / (n as f64).sqrt(); n];
    let mut tmp = vec![0.0; n];
    for _ in 0..20 {
        a.matvec(&v0, &mut tmp);
        let norm: f64 = tmp.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        for (v, t) in v0.iter_mut().zip(&tmp) {
            *v = t / norm;
        }
    }
    q.push(v0);
    let mut m = 0;
    for j in 0..k {
        let mut w = vec![0.0; n];
        a.matvec(&q[j], &mut w);
        for i in 0..=j {
            let dot: f64 = q[i].iter().zip(&w).map(|(a, b)| a * b).sum();
            h[(i, j)] = dot;
            for (wi, qi) in w.iter_mut().zip(&q[i]) {
                *wi -= dot * qi;
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        h[(j + 1, j)] = norm;
        m = j + 1;
        if norm < 1e-12 {
            break; // invariant subspace: eigenvalues are exact
        }
        for wi in &mut w {
            *wi /= norm;
        }
        q.push(w);
    }
    let hm = h.view((0, 0), (m, m)).into_owned();
    hm.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Dense-eigenvalue spectral radius (test oracle for the Arnoldi estimate).
pub fn spectral_radius_dense(a: &SparseRows) -> f64 {
    a.to_dense().complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Integrate the reservoir ODE `r' = f(A r + W_hyb x(t))` from `r0 = 0`,
/// driving it with the spline `driver` (clamped at the ends), saving at
/// `saveat`.
pub fn simulate_reservoir(
    mats: &ReservoirMatrices,
    driver: &SplineSeries,
    spec: &ReservoirSpec,
    tspan: (f64, f64),
    saveat: &[f64],
    opts: &SolveOptions,
) -> Result<Trajectory, IntegrateError> {
    let n = mats.a.n;
    let n_in = mats.w_hyb.ncols();
    if driver.n_vars() != n_in {
        return Err(IntegrateError::InvalidInput(format!(
            "driver has {} variables, W_hyb expects {}",
            driver.n_vars(),
            n_in
        )));
    }
    let act = spec.activation;
    let rhs = move |r: &[f64], _p: &[f64], t: f64, dr: &mut [f64]| {
        let mut u = vec![0.0; n_in];
        driver.eval_into(t, &mut u);
        mats.a.matvec(r, dr);
        for i in 0..n {
            let mut acc = dr[i];
            for j in 0..n_in {
                acc += mats.w_hyb[(i, j)] * u[j];
            }
            dr[i] = act.apply(acc);
        }
    };
    let problem = OdeProblem::new(&rhs, n, tspan, vec![], mats.r0.clone());
    let o = opts.clone().with_saveat(saveat.to_vec());
    solve_explicit(&problem, &o)
}
