//! Box-bounded parameter spaces and low-discrepancy sampling: seeded Latin
//! hypercube designs for training, the deterministic Sobol sequence for
//! testing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("Sobol sequence supports up to {max} dimensions, requested {requested}")]
    DimensionUnsupported { requested: usize, max: usize },
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
}

/// Per-dimension scale: stratification and low-discrepancy mapping happen in
/// linear or log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// A box-bounded design space with named dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub scale: Vec<Scale>,
}

impl ParameterSpace {
    pub fn new(
        names: Vec<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        scale: Vec<Scale>,
    ) -> Result<Self, SamplingError> {
        let d = names.len();
        if lower.len() != d || upper.len() != d || scale.len() != d {
            return Err(SamplingError::InvalidSpace(format!(
                "field lengths disagree: {d} names, {} lower, {} upper, {} scale",
                lower.len(),
                upper.len(),
                scale.len()
            )));
        }
        for i in 0..d {
            if !(lower[i] < upper[i]) {
                return Err(SamplingError::InvalidSpace(format!(
                    "dimension {} ({}): lower {} must be below upper {}",
                    i, names[i], lower[i], upper[i]
                )));
            }
            if scale[i] == Scale::Log && lower[i] <= 0.0 {
                return Err(SamplingError::InvalidSpace(format!(
                    "dimension {} ({}): log scale requires positive lower bound",
                    i, names[i]
                )));
            }
        }
        Ok(Self { names, lower, upper, scale })
    }

    /// Convenience constructor with linear scales throughout.
    pub fn linear(names: &[&str], lower: &[f64], upper: &[f64]) -> Result<Self, SamplingError> {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            lower.to_vec(),
            upper.to_vec(),
            vec![Scale::Linear; names.len()],
        )
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Map a point from the unit cube into the box (log dims map in log space).
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| match self.scale[i] {
                Scale::Linear => self.lower[i] + u[i] * (self.upper[i] - self.lower[i]),
                Scale::Log => {
                    let (a, b) = (self.lower[i].ln(), self.upper[i].ln());
                    (a + u[i] * (b - a)).exp()
                }
            })
            .collect()
    }

    /// Inverse of [`from_unit`], clamped to [0, 1].
    pub fn to_unit(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let u = match self.scale[i] {
                    Scale::Linear => (p[i] - self.lower[i]) / (self.upper[i] - self.lower[i]),
                    Scale::Log => {
                        (p[i].ln() - self.lower[i].ln())
                            / (self.upper[i].ln() - self.lower[i].ln())
                    }
                };
                u.clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Box center: arithmetic per linear dimension, geometric per log dimension.
    pub fn center(&self) -> Vec<f64> {
        self.from_unit(&vec![0.5; self.dim()])
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && (0..self.dim()).all(|i| p[i] >= self.lower[i] && p[i] <= self.upper[i])
    }
}

/// Latin hypercube design: for every dimension the `n` samples occupy the
/// `n` equal-probability strata exactly once, with a uniform position inside
/// each stratum and a seeded stratum permutation. Log dimensions stratify in
/// log space.
pub fn latin_hypercube(space: &ParameterSpace, n: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(n >= 1, "need at least one sample");
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // unit-cube design column by column
    let mut unit = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the seeded stream
        for i in (1..n).rev() {
            let k = rng.random_range(0..=i);
            perm.swap(i, k);
        }
        for (i, row) in unit.iter_mut().enumerate() {
            let offset: f64 = rng.random();
            row[j] = (perm[i] as f64 + offset) / n as f64;
        }
    }
    unit.iter().map(|u| space.from_unit(u)).collect()
}

// Primitive polynomials and initial direction numbers for the first 24
// dimensions of the Sobol sequence (Joe & Kuo tables; dimension 1 is the
// van der Corput sequence). poly is the full binary encoding including the
// leading and trailing 1 bits.
const SOBOL_POLY: [u32; 24] = [
    1, 3, 7, 11, 13, 19, 25, 37, 41, 47, 55, 59, 61, 67, 91, 97, 103, 109, 115, 131, 137, 143,
    145, 157,
];
const SOBOL_MINIT: [&[u32]; 24] = [
    &[1],
    &[1],
    &[1, 3],
    &[1, 3, 1],
    &[1, 1, 1],
    &[1, 1, 3, 3],
    &[1, 3, 5, 13],
    &[1, 1, 5, 5, 17],
    &[1, 1, 5, 5, 5],
    &[1, 1, 7, 11, 19],
    &[1, 1, 5, 1, 1],
    &[1, 1, 1, 3, 11],
    &[1, 3, 5, 5, 31],
    &[1, 3, 3, 9, 7, 49],
    &[1, 1, 1, 15, 21, 21],
    &[1, 3, 1, 13, 27, 49],
    &[1, 1, 1, 15, 7, 5],
    &[1, 3, 1, 15, 13, 25],
    &[1, 1, 5, 5, 19, 61],
    &[1, 3, 7, 11, 23, 15, 103],
    &[1, 3, 7, 13, 13, 15, 69],
    &[1, 1, 3, 13, 7, 35, 63],
    &[1, 3, 5, 9, 1, 25, 53],
    &[1, 3, 1, 13, 9, 35, 107],
];

/// Maximum supported Sobol dimension.
pub const SOBOL_MAX_DIM: usize = SOBOL_POLY.len();

const SOBOL_BITS: u32 = 32;

fn sobol_directions(dim_idx: usize) -> [u64; SOBOL_BITS as usize + 1] {
    let mut v = [0u64; SOBOL_BITS as usize + 1];
    if dim_idx == 0 {
        for k in 1..=SOBOL_BITS as usize {
            v[k] = 1u64 << (SOBOL_BITS as usize - k);
        }
        return v;
    }
    let p = SOBOL_POLY[dim_idx];
    let s = (32 - p.leading_zeros() - 1) as usize;
    let mut m = vec![0u64; SOBOL_BITS as usize + 1];
    for (k, &mi) in SOBOL_MINIT[dim_idx].iter().enumerate() {
        m[k + 1] = u64::from(mi);
    }
    for k in (s + 1)..=(SOBOL_BITS as usize) {
        let mut new = m[k - s] ^ (m[k - s] << s);
        for i in 1..s {
            if (p >> (s - i)) & 1 == 1 {
                new ^= m[k - i] << i;
            }
        }
        m[k] = new;
    }
    for k in 1..=SOBOL_BITS as usize {
        v[k] = m[k] << (SOBOL_BITS as usize - k);
    }
    v
}

/// First `n` points of the `d`-dimensional Sobol sequence (standard
/// direction numbers, Gray-code enumeration, index starting at 1 so the
/// all-zeros point is skipped), affinely mapped into the box.
pub fn sobol_sample(
    space: &ParameterSpace,
    n: usize,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    let d = space.dim();
    if d > SOBOL_MAX_DIM {
        return Err(SamplingError::DimensionUnsupported { requested: d, max: SOBOL_MAX_DIM });
    }
    let dirs: Vec<_> = (0..d).map(sobol_directions).collect();
    let mut state = vec![0u64; d];
    let mut out = Vec::with_capacity(n);
    let denom = (1u64 << SOBOL_BITS) as f64;
    for i in 1..=n as u64 {
        let c = i.trailing_zeros() as usize + 1;
        let mut unit = vec![0.0; d];
        for j in 0..d {
            state[j] ^= dirs[j][c];
            unit[j] = state[j] as f64 / denom;
        }
        out.push(space.from_unit(&unit));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_space(d: usize) -> ParameterSpace {
        let names: Vec<&str> = (0..d).map(|_| "x").collect();
        ParameterSpace::linear(&names, &vec![0.0; d], &vec![1.0; d]).unwrap()
    }

    #[test]
    fn space_validation() {
        assert!(ParameterSpace::linear(&["a"], &[1.0], &[0.0]).is_err());
        assert!(ParameterSpace::new(
            vec!["a".into()],
            vec![-1.0],
            vec![1.0],
            vec![Scale::Log]
        )
        .is_err());
        assert!(ParameterSpace::linear(&["a", "b"], &[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn lhs_single_point_inside_box() {
        let space = ParameterSpace::linear(&["a", "b"], &[2.0, -1.0], &[3.0, 1.0]).unwrap();
        let pts = latin_hypercube(&space, 1, 0);
        assert_eq!(pts.len(), 1);
        assert!(space.contains(&pts[0]));
        assert!(pts[0][0] > 2.0 && pts[0][0] < 3.0);
    }

    #[test]
    fn lhs_stratification_every_dim() {
        for &n in &[2usize, 10, 100] {
            let space = unit_space(3);
            let pts = latin_hypercube(&space, n, 42);
            for j in 0..3 {
                let mut counts = vec![0usize; n];
                for p in &pts {
                    let bin = ((p[j] * n as f64) as usize).min(n - 1);
                    counts[bin] += 1;
                }
                assert!(counts.iter().all(|&c| c == 1), "n={n} dim={j}: {counts:?}");
            }
        }
    }

    #[test]
    fn lhs_log_dimension_stratifies_in_log_space() {
        let space = ParameterSpace::new(
            vec!["k".into()],
            vec![1e-3],
            vec![1e3],
            vec![Scale::Log],
        )
        .unwrap();
        let n = 6;
        let pts = latin_hypercube(&space, n, 7);
        let mut counts = vec![0usize; n];
        for p in &pts {
            let u = (p[0].ln() - 1e-3f64.ln()) / (1e3f64.ln() - 1e-3f64.ln());
            counts[((u * n as f64) as usize).min(n - 1)] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1), "{counts:?}");
    }

    #[test]
    fn lhs_seeded_determinism() {
        let space = unit_space(4);
        let a = latin_hypercube(&space, 20, 9);
        let b = latin_hypercube(&space, 20, 9);
        let c = latin_hypercube(&space, 20, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sobol_first_point_is_half() {
        let space = unit_space(1);
        let pts = sobol_sample(&space, 1).unwrap();
        assert_eq!(pts[0][0], 0.5);
    }

    #[test]
    fn sobol_first_three_points_2d() {
        let space = unit_space(2);
        let pts = sobol_sample(&space, 3).unwrap();
        assert_eq!(pts[0], vec![0.5, 0.5]);
        assert_eq!(pts[1], vec![0.75, 0.25]);
        assert_eq!(pts[2], vec![0.25, 0.75]);
    }

    #[test]
    fn sobol_matches_reference_3d() {
        // Reference values from a standard Joe-Kuo direction-number
        // implementation (first six points after the zero point).
        let expect = [
            [0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25],
            [0.25, 0.75, 0.75],
            [0.375, 0.375, 0.625],
            [0.875, 0.875, 0.125],
            [0.625, 0.125, 0.875],
        ];
        let pts = sobol_sample(&unit_space(3), 6).unwrap();
        for (p, e) in pts.iter().zip(expect.iter()) {
            for (a, b) in p.iter().zip(e.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sobol_points_stay_in_box() {
        let space = ParameterSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.036, 2.7e7, 0.9e4],
            vec![0.044, 3.3e7, 1.1e4],
            vec![Scale::Linear; 3],
        )
        .unwrap();
        for p in sobol_sample(&space, 500).unwrap() {
            assert!(space.contains(&p), "{p:?}");
        }
    }

    #[test]
    fn sobol_dimension_limit() {
        let space = unit_space(SOBOL_MAX_DIM + 1);
        assert!(matches!(
            sobol_sample(&space, 1),
            Err(SamplingError::DimensionUnsupported { .. })
        ));
        assert!(sobol_sample(&unit_space(21), 4).is_ok());
    }

    /// Brute-force star discrepancy on an m x m grid of anchored boxes.
    fn star_discrepancy_2d(pts: &[Vec<f64>], m: usize) -> f64 {
        let n = pts.len() as f64;
        let mut worst: f64 = 0.0;
        for gi in 1..=m {
            for gj in 1..=m {
                let (a, b) = (gi as f64 / m as f64, gj as f64 / m as f64);
                let count = pts.iter().filter(|p| p[0] <= a && p[1] <= b).count() as f64;
                worst = worst.max((count / n - a * b).abs());
            }
        }
        worst
    }

    #[test]
    fn sobol_beats_uniform_random_discrepancy() {
        use rand::Rng;
        use rand::SeedableRng;
        let space = unit_space(2);
        let sobol = sobol_sample(&space, 256).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let random: Vec<Vec<f64>> =
            (0..256).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let ds = star_discrepancy_2d(&sobol, 64);
        let dr = star_discrepancy_2d(&random, 64);
        assert!(ds < dr, "sobol {ds} vs random {dr}");
    }

    #[test]
    fn center_respects_scales() {
        let space = ParameterSpace::new(
            vec!["lin".into(), "log".into()],
            vec![0.0, 1.0],
            vec![10.0, 100.0],
            vec![Scale::Linear, Scale::Log],
        )
        .unwrap();
        let c = space.center();
        assert_abs_diff_eq!(c[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 10.0, epsilon = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn lhs_always_inside_box(n in 1usize..40, seed in 0u64..1000) {
            let space = ParameterSpace::linear(
                &["a", "b"], &[-3.0, 100.0], &[7.5, 250.0]).unwrap();
            for p in latin_hypercube(&space, n, seed) {
                proptest::prop_assert!(space.contains(&p));
            }
        }
    }
}
