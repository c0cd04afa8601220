use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// A matrix handed to the Procrustes retraction lost column rank.
    #[error("rank deficient: smallest singular value {sigma_min:e} <= {threshold:e}")]
    RankDeficient { sigma_min: f64, threshold: f64 },

    /// The weighted scatter `X D Xᵀ` is identically zero, so no Lipschitz
    /// step exists. Only happens when every residual column is zero.
    #[error("step size undefined: weighted scatter matrix has zero spectral norm")]
    StepUndefined,

    #[error("columns are not orthonormal: ||WᵀW - I||_F = {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is not symmetric: ||A - Aᵀ||_F = {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl Into<String>,
        found: impl Into<String>,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.into(),
            found: found.into(),
        }
    }
}
