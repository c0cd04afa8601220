//! Robust principal component analysis by direct minimization of the
//! reconstruction error `X - W Wᵀ X` under the elementwise ℓ1 loss and the
//! columnwise ℓ2,p loss (`0 < p <= 2`).
//!
//! Three solver families share one reweighting scheme:
//!
//! * [`solvers::fit_pgd`]: projected gradient with a Lipschitz step and a
//!   Procrustes retraction onto the Stiefel manifold. Monotone.
//! * [`solvers::fit_momentum`]: the same step with momentum extrapolation.
//! * [`solvers::fit_irls`]: reweighted eigendecomposition of `X D Xᵀ`.
//!
//! Vanilla PCA ([`solvers::vanilla_pca`]) is the baseline and the default
//! warm start.
//!
//! Matrices follow the columns-are-samples convention: a dataset with `n`
//! samples of `m` features is an `m × n` [`linalg::DataMatrix`].

pub mod bench;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod objectives;
pub mod parallel;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{DataMatrix, Projection, SymmetricMatrix};
pub use objectives::{NormSpec, Residual, WeightDiag};
pub use solvers::{FitResult, Init, SolverConfig, Variant};
