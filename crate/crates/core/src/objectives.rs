//! Residuals, losses, reweighting diagonals and gradients.
//!
//! Every robust loss here is rewritten as a weighted quadratic
//! `tr(Y D Yᵀ)` in the residual `Y = X - W Wᵀ X`, with a per-sample weight
//! diagonal `D` recomputed from the current residual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, DataMatrix, Projection, SymmetricMatrix};
use crate::parallel::{map_indices, Execution};

/// Default clamp on residual column norms when building weights.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    /// `||Y||_F²`
    FroSquared,
    /// `Σ |Y_ji|`
    ElementwiseL1,
    /// `Σ_i ||y_i||₂^p`, `0 < p <= 2`
    L2p { p: f64 },
}

impl NormSpec {
    pub fn l2p(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidArgument(format!("p must lie in (0, 2], got {p}")));
        }
        Ok(NormSpec::L2p { p })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSpec::L2p { p } => Self::l2p(p).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Short name used on the command line and in output files.
    pub fn name(&self) -> &'static str {
        match self {
            NormSpec::FroSquared => "fro",
            NormSpec::ElementwiseL1 => "l1",
            NormSpec::L2p { .. } => "l2p",
        }
    }

    pub fn p(&self) -> Option<f64> {
        match *self {
            NormSpec::L2p { p } => Some(p),
            _ => None,
        }
    }

    /// Gradient scale: the ℓ1 trace surrogate differentiates to
    /// `-2 X D Xᵀ W`, the ℓ2,p loss (and the squared Frobenius loss as its
    /// `p = 2` case) to `-X D Xᵀ W`.
    pub fn gradient_factor(&self) -> f64 {
        match self {
            NormSpec::ElementwiseL1 => 2.0,
            NormSpec::FroSquared | NormSpec::L2p { .. } => 1.0,
        }
    }
}

/// Nonnegative per-sample weights, the diagonal of `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDiag {
    entries: Vec<f64>,
}

impl WeightDiag {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Y = X - W Wᵀ X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    values: DMatrix<f64>,
}

impl Residual {
    /// Wrap an arbitrary matrix as a residual, e.g. to evaluate weights on
    /// raw data.
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let y = &self.values;
        map_indices(y.ncols(), Execution::Auto, |i| y.column(i).norm())
    }
}

fn check_rows(context: &'static str, x: &DataMatrix, w: &Projection) -> Result<()> {
    if x.features() != w.dim() {
        return Err(Error::dims(context, format!("W with {} rows", x.features()), format!("{} rows", w.dim())));
    }
    Ok(())
}

pub fn residual(x: &DataMatrix, w: &Projection) -> Result<Residual> {
    check_rows("residual", x, w)?;
    let xv = x.values();
    let wv = w.values();
    let coeffs = wv.tr_mul(xv);
    Ok(Residual { values: xv - wv * coeffs })
}

/// `D(i,i) = Σ_j |Y_ji| / max(||Y_i||², eps²)`.
pub fn weights_l1(y: &Residual, eps: f64) -> WeightDiag {
    weights_l1_with(y, eps, Execution::Auto)
}

pub fn weights_l1_with(y: &Residual, eps: f64, exec: Execution) -> WeightDiag {
    let v = &y.values;
    let floor = eps * eps;
    let entries = map_indices(v.ncols(), exec, |i| {
        let col = v.column(i);
        col.iter().map(|a| a.abs()).sum::<f64>() / col.norm_squared().max(floor)
    });
    WeightDiag { entries }
}

/// `D(i,i) = p · max(||Y_i||, eps)^(p-2)`.
pub fn weights_l2p(y: &Residual, p: f64, eps: f64) -> WeightDiag {
    weights_l2p_with(y, p, eps, Execution::Auto)
}

pub fn weights_l2p_with(y: &Residual, p: f64, eps: f64, exec: Execution) -> WeightDiag {
    let v = &y.values;
    let entries = map_indices(v.ncols(), exec, |i| {
        if p == 2.0 {
            2.0
        } else {
            p * v.column(i).norm().max(eps).powf(p - 2.0)
        }
    });
    WeightDiag { entries }
}

/// Weight diagonal for the given loss. The squared Frobenius loss is the
/// `p = 2` member of the ℓ2,p family.
pub fn weights(y: &Residual, spec: NormSpec, eps: f64) -> WeightDiag {
    match spec {
        NormSpec::FroSquared => weights_l2p(y, 2.0, eps),
        NormSpec::ElementwiseL1 => weights_l1(y, eps),
        NormSpec::L2p { p } => weights_l2p(y, p, eps),
    }
}

/// Loss of a precomputed residual. Never clamps.
pub fn loss(y: &Residual, spec: NormSpec) -> f64 {
    let v = &y.values;
    let per_column = map_indices(v.ncols(), Execution::Auto, |i| {
        let col = v.column(i);
        match spec {
            NormSpec::FroSquared => col.norm_squared(),
            NormSpec::ElementwiseL1 => col.iter().map(|a| a.abs()).sum(),
            NormSpec::L2p { p } => {
                if p == 2.0 {
                    col.norm_squared()
                } else {
                    col.norm().powf(p)
                }
            }
        }
    });
    // Fixed left-to-right order keeps the value schedule-independent.
    per_column.iter().sum()
}

/// True reconstruction loss of `X` on `span(W)`.
pub fn objective_value(x: &DataMatrix, w: &Projection, spec: NormSpec) -> Result<f64> {
    Ok(loss(&residual(x, w)?, spec))
}

/// `-factor · X diag(D) Xᵀ W`, evaluated as `-factor · X (D ∘ XᵀW)`.
pub fn gradient(x: &DataMatrix, w: &Projection, d: &WeightDiag, factor: f64) -> Result<DMatrix<f64>> {
    check_rows("gradient", x, w)?;
    if d.len() != x.samples() {
        return Err(Error::dims("gradient", format!("{} weights", x.samples()), format!("{}", d.len())));
    }
    Ok(weighted_scatter_times(x.values(), d.entries(), w.values()) * -factor)
}

/// `X diag(d) Xᵀ V` without forming the `m × m` product.
pub(crate) fn weighted_scatter_times(x: &DMatrix<f64>, d: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut coeffs = x.tr_mul(v);
    for (mut row, &wt) in coeffs.row_iter_mut().zip(d) {
        row *= wt;
    }
    x * coeffs
}

/// Lipschitz step `t = 1 / (factor · ||X D Xᵀ||₂)`.
pub fn lipschitz_step(x: &DataMatrix, d: &WeightDiag, factor: f64) -> Result<f64> {
    let scatter = SymmetricMatrix::weighted_scatter(x.values(), d.entries())?;
    step_from_scatter(&scatter, factor)
}

pub(crate) fn step_from_scatter(scatter: &SymmetricMatrix, factor: f64) -> Result<f64> {
    let norm = spectral_norm(scatter);
    if norm == 0.0 {
        return Err(Error::StepUndefined);
    }
    Ok(1.0 / (factor * norm))
}
