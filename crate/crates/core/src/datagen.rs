//! Seeded synthetic data: a random `k_true`-dimensional subspace with
//! Gaussian noise and a trailing block of gross outliers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center_columns, random_orthonormal, DataMatrix, Projection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub n: usize,
    pub k_true: usize,
    pub noise_sigma: f64,
    pub outlier_frac: f64,
    pub outlier_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidSpec("m and n must be at least 1".into()));
        }
        if self.k_true == 0 || self.k_true > self.m {
            return Err(Error::InvalidSpec(format!("k_true must lie in [1, m = {}], got {}", self.m, self.k_true)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise_sigma must be nonnegative, got {}", self.noise_sigma)));
        }
        if !(0.0..1.0).contains(&self.outlier_frac) {
            return Err(Error::InvalidSpec(format!("outlier_frac must lie in [0, 1), got {}", self.outlier_frac)));
        }
        if !(self.outlier_scale > 0.0 && self.outlier_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!("outlier_scale must be positive, got {}", self.outlier_scale)));
        }
        Ok(())
    }

    /// `floor(outlier_frac · n)`.
    pub fn outlier_count(&self) -> usize {
        (self.outlier_frac * self.n as f64).floor() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// Centered `m × n` data.
    pub data: DataMatrix,
    pub w_true: Projection,
    /// `true` for outlier columns (always the trailing ones).
    pub outlier_mask: Vec<bool>,
}

/// Generate data without the final centering step.
///
/// Draw order: `W_true` (column-major Gaussian, orthonormalized), then per
/// inlier column the coefficients `z` followed by the noise `η`, then per
/// outlier column the Gaussian `g`.
pub fn synth_uncentered(spec: &SynthSpec) -> Result<(DMatrix<f64>, Projection, Vec<bool>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w_true = random_orthonormal(spec.m, spec.k_true, &mut rng)?;
    let outliers = spec.outlier_count();
    let inliers = spec.n - outliers;

    let mut x = DMatrix::zeros(spec.m, spec.n);
    for j in 0..inliers {
        let z = DMatrix::from_fn(spec.k_true, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut col = w_true.values() * z;
        for v in col.iter_mut() {
            let eta: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sigma * eta;
        }
        x.set_column(j, &col.column(0));
    }
    for j in inliers..spec.n {
        for i in 0..spec.m {
            let g: f64 = rng.sample(StandardNormal);
            x[(i, j)] = spec.outlier_scale * g;
        }
    }
    let mask = (0..spec.n).map(|j| j >= inliers).collect();
    Ok((x, w_true, mask))
}

pub fn synth_subspace(spec: &SynthSpec) -> Result<SynthData> {
    let (x, w_true, outlier_mask) = synth_uncentered(spec)?;
    let (data, _) = center_columns(&DataMatrix::new(x)?);
    Ok(SynthData { data, w_true, outlier_mask })
}
