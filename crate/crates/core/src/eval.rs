//! Subspace-quality metrics.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DataMatrix, Projection};
use crate::objectives::{loss, residual, NormSpec};

/// Canonical angles (radians, ascending) between `span(W1)` and `span(W2)`.
pub fn principal_angles(w1: &Projection, w2: &Projection) -> Result<Vec<f64>> {
    if w1.dim() != w2.dim() {
        return Err(Error::dims("principal_angles", format!("m = {}", w1.dim()), format!("m = {}", w2.dim())));
    }
    let cross = w1.values().tr_mul(w2.values());
    let sv = SVD::new(cross, false, false).singular_values;
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Largest principal angle, the usual subspace distance.
pub fn max_principal_angle(w1: &Projection, w2: &Projection) -> Result<f64> {
    Ok(principal_angles(w1, w2)?.into_iter().fold(0.0, f64::max))
}

/// Reconstruction errors of one projection under all three losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fro_sq_error: f64,
    pub l1_error: f64,
    pub l2p_error: f64,
    /// Exponent used for `l2p_error`.
    pub l2p_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles_rad: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_angle_rad: Option<f64>,
    pub iterations: usize,
    pub wall_time_ms: f64,
}

/// The ℓ2,p column takes its exponent from `spec` when it is an ℓ2,p loss
/// and uses `p = 1` otherwise.
pub fn evaluate(x: &DataMatrix, w: &Projection, w_ref: Option<&Projection>, spec: NormSpec) -> Result<EvalReport> {
    let y = residual(x, w)?;
    let p = spec.p().unwrap_or(1.0);
    let angles = w_ref.map(|r| principal_angles(w, r)).transpose()?;
    Ok(EvalReport {
        fro_sq_error: loss(&y, NormSpec::FroSquared),
        l1_error: loss(&y, NormSpec::ElementwiseL1),
        l2p_error: loss(&y, NormSpec::L2p { p }),
        l2p_p: p,
        max_angle_rad: angles.as_ref().map(|a| a.iter().copied().fold(0.0, f64::max)),
        angles_rad: angles,
        iterations: 0,
        wall_time_ms: 0.0,
    })
}
