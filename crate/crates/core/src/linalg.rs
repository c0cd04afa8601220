//! Dense linear-algebra primitives shared by every solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance factor for `||WᵀW - I||_F <= ORTHONORMALITY_TOL * k`.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Relative tolerance for `||A - Aᵀ||_F <= SYMMETRY_TOL * ||A||_F`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Singular values at or below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Relative eigen-gap below which the leading subspace is flagged.
pub const SPECTRUM_GAP_TOL: f64 = 1e-10;

/// Real `m × n` data matrix. Rows are features, columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    centered: bool,
}

impl DataMatrix {
    /// Wrap a finite, non-empty matrix. The result is marked uncentered.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::dims("DataMatrix::new", "m >= 1 and n >= 1", format!("{}x{}", values.nrows(), values.ncols())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values, centered: false })
    }

    /// Build from sample-major rows (one inner vector per sample).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples.len();
        let m = samples.first().map_or(0, Vec::len);
        if let Some(bad) = samples.iter().find(|s| s.len() != m) {
            return Err(Error::dims("DataMatrix::from_samples", format!("{m} features"), format!("{} features", bad.len())));
        }
        Self::new(DMatrix::from_fn(m, n, |i, j| samples[j][i]))
    }

    /// Mark the matrix as already centered, checking the row sums.
    pub fn assume_centered(mut self) -> Result<Self> {
        if !rows_centered(&self.values) {
            return Err(Error::InvalidArgument("rows do not sum to zero".into()));
        }
        self.centered = true;
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Number of features `m`.
    pub fn features(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples `n`.
    pub fn samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }
}

fn rows_centered(values: &DMatrix<f64>) -> bool {
    let n = values.ncols() as f64;
    let scale = values.amax();
    let tol = 1e-9 * n * scale;
    values.row_iter().all(|row| row.sum().abs() <= tol)
}

/// `m × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    values: DMatrix<f64>,
}

impl Projection {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (m, k) = values.shape();
        if k == 0 || k > m {
            return Err(Error::dims("Projection::new", format!("1 <= k <= m = {m}"), format!("k = {k}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let deviation = orthonormality_error(&values);
        if deviation > ORTHONORMALITY_TOL * k as f64 {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { values })
    }

    /// The first `k` standard basis vectors of `R^m`.
    pub fn standard(m: usize, k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(m, k))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Subspace dimension `k`.
    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    /// `||WᵀW - I||_F`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.values)
    }
}

/// `||WᵀW - I||_F` for an arbitrary matrix.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let k = w.ncols();
    (w.tr_mul(w) - DMatrix::<f64>::identity(k, k)).norm()
}

/// Real symmetric `m × m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    values: DMatrix<f64>,
}

impl SymmetricMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::dims("SymmetricMatrix::new", "non-empty square matrix", format!("{}x{}", values.nrows(), values.ncols())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let asymmetry = (&values - values.transpose()).norm();
        if asymmetry > SYMMETRY_TOL * values.norm() {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self { values })
    }

    /// `X diag(d) Xᵀ`, filled from the lower triangle so the result is
    /// exactly symmetric.
    pub fn weighted_scatter(x: &DMatrix<f64>, d: &[f64]) -> Result<Self> {
        if x.ncols() != d.len() {
            return Err(Error::dims("weighted_scatter", format!("{} weights", x.ncols()), format!("{} weights", d.len())));
        }
        let m = x.nrows();
        let mut scaled = x.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(d) {
            col *= w;
        }
        let full = &scaled * x.transpose();
        let values = DMatrix::from_fn(m, m, |i, j| if i >= j { full[(i, j)] } else { full[(j, i)] });
        Self::new(values)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// Subtract the per-feature mean from every sample.
pub fn center_columns(x: &DataMatrix) -> (DataMatrix, DVector<f64>) {
    let values = x.values();
    let mean = values.column_mean();
    let mut centered = values.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    (DataMatrix { values: centered, centered: true }, mean)
}

/// Nearest matrix with orthonormal columns: `U Vᵀ` from the thin SVD
/// `R = U S Vᵀ`, which maximizes `tr(W̄ᵀ R)` over the Stiefel manifold.
pub fn procrustes_project(r: &DMatrix<f64>) -> Result<Projection> {
    let (m, k) = r.shape();
    if k == 0 || k > m {
        return Err(Error::dims("procrustes_project", format!("1 <= k <= m = {m}"), format!("k = {k}")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let svd = SVD::new(r.clone(), true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let threshold = RANK_TOL * sigma_max;
    if sigma_max == 0.0 || sigma_min <= threshold {
        return Err(Error::RankDeficient { sigma_min, threshold });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    Projection::new(u * v_t)
}

/// Warning raised when the `r`-th and `(r+1)`-th eigenvalues are too close
/// for the leading subspace to be well determined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumGap {
    pub lambda_r: f64,
    pub lambda_next: f64,
}

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenSubspace {
    pub projection: Projection,
    /// Eigenvalues matching the projection's columns, descending.
    pub eigenvalues: Vec<f64>,
    pub gap_warning: Option<SpectrumGap>,
}

/// Unit eigenvectors for the `r` algebraically largest eigenvalues, in
/// descending eigenvalue order. Each column's first nonzero entry is made
/// nonnegative.
pub fn top_r_eigvecs(a: &SymmetricMatrix, r: usize) -> Result<EigenSubspace> {
    let m = a.dim();
    if r == 0 || r > m {
        return Err(Error::dims("top_r_eigvecs", format!("1 <= r <= {m}"), format!("r = {r}")));
    }
    let eig = SymmetricEigen::new(a.values().clone());
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort keeps the decomposition's own order among ties.
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut w = DMatrix::zeros(m, r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        let mut col = eig.eigenvectors.column(idx).into_owned();
        col /= col.norm();
        fix_sign(&mut col);
        w.set_column(c, &col);
    }
    let eigenvalues: Vec<f64> = order.iter().take(r).map(|&i| eig.eigenvalues[i]).collect();
    let gap_warning = if r < m {
        let lambda_r = eigenvalues[r - 1];
        let lambda_next = eig.eigenvalues[order[r]];
        let lambda_1 = eigenvalues[0].abs();
        (lambda_r - lambda_next <= SPECTRUM_GAP_TOL * lambda_1).then_some(SpectrumGap { lambda_r, lambda_next })
    } else {
        None
    };
    // The eigenvector matrix of a symmetric matrix is orthogonal to working
    // precision; re-orthonormalize anyway so the invariant holds strictly.
    let projection = match Projection::new(w.clone()) {
        Ok(p) => p,
        Err(_) => procrustes_project(&w)?,
    };
    Ok(EigenSubspace { projection, eigenvalues, gap_warning })
}

fn fix_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// `max |λ|` of a symmetric matrix.
///
/// Power iteration from the normalized all-ones vector, capped at `10 m`
/// steps and accepted once the eigen-residual `||Av - θv||` drops below
/// `1e-10 |θ|`. Falls back to a full eigendecomposition otherwise.
pub fn spectral_norm(a: &SymmetricMatrix) -> f64 {
    let values = a.values();
    let m = a.dim();
    if values.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    for _ in 0..10 * m {
        let av = values * &v;
        let theta = v.dot(&av);
        let residual = (&av - &v * theta).norm();
        if theta != 0.0 && residual <= 1e-10 * theta.abs() {
            return theta.abs();
        }
        let norm = av.norm();
        if norm == 0.0 {
            break;
        }
        v = av / norm;
    }
    SymmetricEigen::new(values.clone()).eigenvalues.amax()
}

/// Orthonormalize a seeded standard-Gaussian `m × k` matrix (QR with the
/// diagonal of R made positive).
pub fn random_orthonormal<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Projection> {
    if k == 0 || k > m {
        return Err(Error::dims("random_orthonormal", format!("1 <= k <= m = {m}"), format!("k = {k}")));
    }
    let g = DMatrix::from_fn(m, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Projection::new(q).or_else(|_| procrustes_project(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_spd(m: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let b = gaussian(m, m, rng);
        SymmetricMatrix::weighted_scatter(&b, &vec![1.0; m]).unwrap()
    }

    #[test]
    fn data_matrix_rejects_empty_and_nonfinite() {
        assert!(DataMatrix::new(DMatrix::zeros(0, 3)).is_err());
        let mut v = DMatrix::zeros(2, 2);
        v[(0, 1)] = f64::NAN;
        assert_eq!(DataMatrix::new(v), Err(Error::NonFinite));
    }

    #[test]
    fn center_is_idempotent_on_centered_input() {
        let x = DataMatrix::new(DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 2.0, 0.0, -2.0])).unwrap();
        let (c, mean) = center_columns(&x);
        assert_eq!(c.values(), x.values());
        assert!(mean.iter().all(|&v| v == 0.0));
        assert!(c.is_centered());
    }

    #[test]
    fn center_constant_columns() {
        let x = DataMatrix::new(DMatrix::from_row_slice(2, 3, &[4.0, 4.0, 4.0, -1.5, -1.5, -1.5])).unwrap();
        let (c, mean) = center_columns(&x);
        assert!(c.values().iter().all(|&v| v == 0.0));
        assert_eq!(mean.as_slice(), &[4.0, -1.5]);
    }

    #[test]
    fn center_random_row_sums_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DataMatrix::new(gaussian(3, 4, &mut rng)).unwrap();
        let (c, _) = center_columns(&x);
        for row in c.values().row_iter() {
            assert!(row.sum().abs() <= 1e-12);
        }
        assert!(c.clone().assume_centered().is_ok());
    }

    #[test]
    fn procrustes_keeps_orthonormal_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_orthonormal(5, 3, &mut rng).unwrap();
        let w = procrustes_project(q.values()).unwrap();
        assert!((w.values() - q.values()).amax() <= 1e-12);
    }

    #[test]
    fn procrustes_scaled_unit_vector() {
        let w = procrustes_project(&DMatrix::from_column_slice(2, 1, &[2.0, 0.0])).unwrap();
        assert!((w.values()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(w.values()[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn procrustes_maximizes_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = gaussian(5, 2, &mut rng);
        let w = procrustes_project(&r).unwrap();
        let best = w.values().tr_mul(&r).trace();
        for _ in 0..1000 {
            let q = random_orthonormal(5, 2, &mut rng).unwrap();
            assert!(q.values().tr_mul(&r).trace() <= best + 1e-12);
        }
    }

    #[test]
    fn procrustes_rank_deficient() {
        let r = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(procrustes_project(&r), Err(Error::RankDeficient { .. })));
        assert!(matches!(procrustes_project(&DMatrix::zeros(3, 1)), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn eigvecs_of_diagonal() {
        let a = SymmetricMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 3.0, 1.0]))).unwrap();
        let e = top_r_eigvecs(&a, 2).unwrap();
        let w = e.projection.values();
        // span{e1, e2}: third row vanishes
        assert!(w.row(2).amax() < 1e-14);
        assert_eq!(e.eigenvalues, vec![5.0, 3.0]);
        assert!(e.gap_warning.is_none());
    }

    #[test]
    fn eigvecs_of_identity_flag_gap() {
        let a = SymmetricMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let e = top_r_eigvecs(&a, 2).unwrap();
        let w = e.projection.values();
        assert!((a.values() * w - w).norm() < 1e-14);
        assert!(e.projection.orthonormality_error() < 1e-14);
        assert!(e.gap_warning.is_some());
    }

    #[test]
    fn eigen_residual_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = random_spd(6, &mut rng);
            let e = top_r_eigvecs(&a, 3).unwrap();
            let w = e.projection.values();
            let lam = DMatrix::from_diagonal(&DVector::from_vec(e.eigenvalues.clone()));
            let res = (a.values() * w - w * lam).norm();
            assert!(res <= 1e-9 * a.values().norm());
            assert!(e.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn eigvec_sign_convention() {
        let a = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let e = top_r_eigvecs(&a, 2).unwrap();
        for col in e.projection.values().column_iter() {
            let first = col.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn spectral_norm_small_cases() {
        let a = SymmetricMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 2.0]))).unwrap();
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-12);
        let z = SymmetricMatrix::new(DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(spectral_norm(&z), 0.0);
        // equal-magnitude eigenvalues of opposite sign defeat power iteration
        let pm = SymmetricMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -3.0]))).unwrap();
        assert!((spectral_norm(&pm) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_matches_full_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_spd(8, &mut rng);
            let full = SymmetricEigen::new(a.values().clone()).eigenvalues.amax();
            let s = spectral_norm(&a);
            assert!((s - full).abs() <= 1e-9 * full);
            for _ in 0..100 {
                let v = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
                assert!((a.values() * &v).norm() / v.norm() <= s * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn symmetric_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(SymmetricMatrix::new(a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn projection_rejects_bad_input() {
        assert!(matches!(
            Projection::new(DMatrix::from_column_slice(2, 1, &[1.0, 1.0])),
            Err(Error::NotOrthonormal { .. })
        ));
        assert!(Projection::new(DMatrix::identity(2, 3)).is_err());
    }
}
