//! Robust PCA solvers over the Stiefel manifold `{W : WᵀW = I}`.
//!
//! All three variants recompute the weight diagonal `D` from the current
//! residual at every iteration and then update `W` against the weighted
//! scatter `X D Xᵀ`:
//!
//! * [`Variant::Pgd`]: `W ← polar(W + t·c·X D Xᵀ W)`, `t = 1/(c ||X D Xᵀ||₂)`.
//! * [`Variant::Momentum`]: the same step taken from the extrapolated point
//!   `V = W + (s-2)/(s+1) (W - W_old)`.
//! * [`Variant::Irls`]: `W ←` top-k eigenvectors of `X D Xᵀ`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{procrustes_project, random_orthonormal, top_r_eigvecs, DataMatrix, Projection, SymmetricMatrix};
use crate::objectives::{loss, residual, step_from_scatter, weighted_scatter_times, weights, NormSpec, Residual, DEFAULT_EPS};

pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Slack, relative to `|J₀|`, allowed before a trace increase counts as a
/// monotonicity violation.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Pgd,
    Momentum,
    Irls,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Pgd => "pgd",
            Variant::Momentum => "momentum",
            Variant::Irls => "irls",
        }
    }

    pub const ALL: [Variant; 3] = [Variant::Pgd, Variant::Momentum, Variant::Irls];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    VanillaPca,
    RandomOrthonormal { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    pub max_iter: usize,
    /// Relative objective-change threshold.
    pub tol: f64,
    /// Clamp on residual column norms when building weights.
    pub eps: f64,
    pub init: Init,
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            eps: DEFAULT_EPS,
            init: Init::VanillaPca,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub projection: Projection,
    /// Objective after every iteration, starting with the initial value.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    /// Number of steps where the trace rose by more than
    /// `MONOTONE_SLACK · |J₀|`.
    pub monotone_violations: usize,
    /// Iterations whose eigen-update had an ill-determined subspace.
    pub spectrum_gap_warnings: usize,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace never empty")
    }
}

/// `|J_last - J_prev| <= tol · max(|J_prev|, 1e-30)`.
pub fn check_convergence(trace: &[f64], tol: f64) -> bool {
    match trace {
        [.., prev, last] => (last - prev).abs() <= tol * prev.abs().max(1e-30),
        _ => false,
    }
}

pub fn count_monotone_violations(trace: &[f64]) -> usize {
    let Some(first) = trace.first() else { return 0 };
    let slack = MONOTONE_SLACK * first.abs();
    trace.windows(2).filter(|p| p[1] > p[0] + slack).count()
}

fn check_k(context: &'static str, x: &DataMatrix, k: usize) -> Result<()> {
    let limit = x.features().min(x.samples());
    if k == 0 || k > limit {
        return Err(Error::dims(context, format!("1 <= k <= min(m, n) = {limit}"), format!("k = {k}")));
    }
    Ok(())
}

/// Top-k eigenvectors of `X Xᵀ`, i.e. the leading left singular vectors.
pub fn vanilla_pca(x: &DataMatrix, k: usize) -> Result<Projection> {
    check_k("vanilla_pca", x, k)?;
    let scatter = SymmetricMatrix::weighted_scatter(x.values(), &vec![1.0; x.samples()])?;
    Ok(top_r_eigvecs(&scatter, k)?.projection)
}

fn initial_projection(x: &DataMatrix, k: usize, init: Init) -> Result<Projection> {
    match init {
        Init::VanillaPca => vanilla_pca(x, k),
        Init::RandomOrthonormal { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_orthonormal(x.features(), k, &mut rng)
        }
    }
}

pub fn fit_pgd(x: &DataMatrix, k: usize, spec: NormSpec, cfg: &SolverConfig) -> Result<FitResult> {
    run(x, k, spec, cfg, Variant::Pgd, &mut |_| {})
}

pub fn fit_momentum(x: &DataMatrix, k: usize, spec: NormSpec, cfg: &SolverConfig) -> Result<FitResult> {
    run(x, k, spec, cfg, Variant::Momentum, &mut |_| {})
}

pub fn fit_irls(x: &DataMatrix, k: usize, spec: NormSpec, cfg: &SolverConfig) -> Result<FitResult> {
    run(x, k, spec, cfg, Variant::Irls, &mut |_| {})
}

/// Dispatch on `cfg.variant`. The squared Frobenius loss has a closed-form
/// minimizer and goes to [`vanilla_pca`] with a one-entry trace.
pub fn fit(x: &DataMatrix, k: usize, spec: NormSpec, cfg: &SolverConfig) -> Result<FitResult> {
    fit_observed(x, k, spec, cfg, &mut |_| {})
}

/// [`fit`] with a hook that sees the initial projection and every iterate.
pub fn fit_observed(
    x: &DataMatrix,
    k: usize,
    spec: NormSpec,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&Projection),
) -> Result<FitResult> {
    if spec == NormSpec::FroSquared {
        let start = Instant::now();
        let projection = vanilla_pca(x, k)?;
        observer(&projection);
        let objective = loss(&residual(x, &projection)?, spec);
        return Ok(FitResult {
            projection,
            objective_trace: vec![objective],
            iterations: 0,
            converged: true,
            wall_time_ms: elapsed_ms(start),
            monotone_violations: 0,
            spectrum_gap_warnings: 0,
        });
    }
    run(x, k, spec, cfg, cfg.variant, observer)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Every residual column is zero up to `eps` relative to the data scale.
fn residual_vanishes(y: &Residual, scale: f64, eps: f64) -> bool {
    y.values().column_iter().all(|c| c.norm() <= eps * scale)
}

fn run(
    x: &DataMatrix,
    k: usize,
    spec: NormSpec,
    cfg: &SolverConfig,
    variant: Variant,
    observer: &mut dyn FnMut(&Projection),
) -> Result<FitResult> {
    let start = Instant::now();
    spec.validate()?;
    cfg.validate()?;
    check_k(variant.name(), x, k)?;

    let xv = x.values();
    let factor = spec.gradient_factor();
    let scale = xv.column_iter().map(|c| c.norm()).fold(1.0, f64::max);

    let mut w = initial_projection(x, k, cfg.init)?;
    observer(&w);
    let mut w_old = w.clone();
    let mut y = residual(x, &w)?;
    let mut trace = vec![loss(&y, spec)];
    let mut converged = false;
    let mut gap_warnings = 0;
    let mut s: usize = 1;

    while trace.len() <= cfg.max_iter {
        if residual_vanishes(&y, scale, cfg.eps) {
            converged = true;
            break;
        }
        let d = weights(&y, spec, cfg.eps);
        let scatter = SymmetricMatrix::weighted_scatter(xv, d.entries())?;

        let next = match variant {
            Variant::Pgd => {
                let t = match step_from_scatter(&scatter, factor) {
                    Ok(t) => t,
                    Err(Error::StepUndefined) => {
                        converged = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let r = w.values() + weighted_scatter_times(xv, d.entries(), w.values()) * (t * factor);
                procrustes_project(&r)?
            }
            Variant::Momentum => {
                let t = match step_from_scatter(&scatter, 1.0) {
                    Ok(t) => t,
                    Err(Error::StepUndefined) => {
                        converged = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let v = extrapolate(w.values(), w_old.values(), s);
                let r = &v + weighted_scatter_times(xv, d.entries(), &v) * t;
                procrustes_project(&r)?
            }
            Variant::Irls => {
                let eig = top_r_eigvecs(&scatter, k)?;
                if eig.gap_warning.is_some() {
                    gap_warnings += 1;
                }
                eig.projection
            }
        };
        observer(&next);

        w_old = std::mem::replace(&mut w, next);
        s += 1;
        y = residual(x, &w)?;
        trace.push(loss(&y, spec));
        if check_convergence(&trace, cfg.tol) {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        projection: w,
        iterations: trace.len() - 1,
        monotone_violations: count_monotone_violations(&trace),
        objective_trace: trace,
        converged,
        wall_time_ms: elapsed_ms(start),
        spectrum_gap_warnings: gap_warnings,
    })
}

/// `V = W + (s-2)/(s+1) (W - W_old)`.
fn extrapolate(w: &DMatrix<f64>, w_old: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let coef = (s as f64 - 2.0) / (s as f64 + 1.0);
    w + (w - w_old) * coef
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synth_subspace, SynthSpec};
    use crate::eval::principal_angles;
    use crate::objectives::objective_value;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn instance(m: usize, n: usize, k: usize, seed: u64) -> DataMatrix {
        let spec = SynthSpec {
            m,
            n,
            k_true: k,
            noise_sigma: 0.1,
            outlier_frac: 0.1,
            outlier_scale: 5.0,
            seed,
        };
        synth_subspace(&spec).unwrap().data
    }

    fn max_angle(a: &Projection, b: &Projection) -> f64 {
        principal_angles(a, b).unwrap().into_iter().fold(0.0, f64::max)
    }

    #[test]
    fn convergence_criterion_examples() {
        assert!(check_convergence(&[5.0, 5.0], 1e-3));
        assert!(!check_convergence(&[5.0, 4.0], 1e-8));
        assert!(check_convergence(&[1.0, 1.0 + 5e-9], 1e-8));
        assert!(check_convergence(&[0.0, 0.0], 1e-8));
        assert!(!check_convergence(&[1.0], 1e-8));
    }

    #[test]
    fn vanilla_on_axis_data() {
        let x = DataMatrix::new(DMatrix::from_row_slice(2, 3, &[2.0, -2.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        let w = vanilla_pca(&x, 1).unwrap();
        assert!((w.values()[(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!(w.values()[(1, 0)].abs() < 1e-14);
        assert!(vanilla_pca(&x, 3).is_err());
    }

    #[test]
    fn vanilla_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = instance(6, 40, 2, 21);
        let q = random_orthonormal(6, 6, &mut rng).unwrap();
        let qx = DataMatrix::new(q.values() * x.values()).unwrap();
        let w = vanilla_pca(&x, 2).unwrap();
        let wq = vanilla_pca(&qx, 2).unwrap();
        let rotated = Projection::new(q.values() * w.values()).unwrap();
        assert!(max_angle(&rotated, &wq) < 1e-7);
    }

    #[test]
    fn vanilla_minimizes_frobenius_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = instance(5, 30, 2, 22);
        let w = vanilla_pca(&x, 2).unwrap();
        let best = objective_value(&x, &w, NormSpec::FroSquared).unwrap();
        for _ in 0..1000 {
            let q = random_orthonormal(5, 2, &mut rng).unwrap();
            assert!(objective_value(&x, &q, NormSpec::FroSquared).unwrap() >= best * (1.0 - 1e-12));
        }
    }

    #[test]
    fn exact_low_rank_data_converges_immediately() {
        let spec = SynthSpec { m: 8, n: 50, k_true: 2, noise_sigma: 0.0, outlier_frac: 0.0, outlier_scale: 1.0, seed: 3 };
        let x = synth_subspace(&spec).unwrap().data;
        for variant in Variant::ALL {
            for norm in [NormSpec::ElementwiseL1, NormSpec::L2p { p: 1.0 }] {
                let r = fit(&x, 2, norm, &SolverConfig::new(variant)).unwrap();
                assert!(r.converged);
                assert!(r.iterations <= 1, "{variant:?} took {} iterations", r.iterations);
                assert!(r.final_objective() < 1e-8);
            }
        }
    }

    #[test]
    fn pgd_from_random_start_approaches_exact_subspace() {
        // ℓ1 weights blow up as residual columns vanish, so progress near
        // the exact solution is slow; only the subspace is checked.
        let spec = SynthSpec { m: 6, n: 60, k_true: 2, noise_sigma: 0.0, outlier_frac: 0.0, outlier_scale: 1.0, seed: 4 };
        let d = synth_subspace(&spec).unwrap();
        let cfg = SolverConfig::new(Variant::Pgd).with_init(Init::RandomOrthonormal { seed: 9 }).with_max_iter(2000);
        let r = fit_pgd(&d.data, 2, NormSpec::ElementwiseL1, &cfg).unwrap();
        assert!(r.final_objective() < 1e-2 * r.objective_trace[0]);
        assert!(max_angle(&r.projection, &d.w_true) < 1e-3);
    }

    #[test]
    fn p2_reduces_to_vanilla_pca() {
        let spec = SynthSpec { m: 8, n: 80, k_true: 2, noise_sigma: 0.1, outlier_frac: 0.0, outlier_scale: 1.0, seed: 5 };
        let x = synth_subspace(&spec).unwrap().data;
        let reference = vanilla_pca(&x, 2).unwrap();
        let spec = NormSpec::l2p(2.0).unwrap();
        let cfg = SolverConfig::new(Variant::Pgd).with_init(Init::RandomOrthonormal { seed: 1 }).with_max_iter(20_000).with_tol(1e-15);
        for variant in Variant::ALL {
            let r = fit(&x, 2, spec, &SolverConfig { variant, ..cfg }).unwrap();
            let angle = max_angle(&r.projection, &reference);
            assert!(angle < 1e-6, "{variant:?}: angle {angle}");
        }
        // IRLS at p = 2 lands on the vanilla subspace after one step and stays there.
        let r = fit_irls(&x, 2, spec, &SolverConfig::new(Variant::Irls).with_init(Init::RandomOrthonormal { seed: 2 })).unwrap();
        assert!(r.iterations <= 2);
        assert!(max_angle(&r.projection, &reference) < 1e-7);
    }

    #[test]
    fn irls_agrees_with_pgd_on_l1() {
        // Instance where PGD does not pin a sample to the subspace; see the
        // acceptance suite for the general picture.
        let x = instance(20, 100, 3, 4);
        let pgd = fit_pgd(&x, 3, NormSpec::ElementwiseL1, &SolverConfig::new(Variant::Pgd)).unwrap();
        let irls = fit_irls(&x, 3, NormSpec::ElementwiseL1, &SolverConfig::new(Variant::Irls)).unwrap();
        let rel = (irls.final_objective() - pgd.final_objective()).abs() / pgd.final_objective();
        assert!(rel <= 1e-4, "rel {rel}");
        assert!(irls.iterations <= pgd.iterations);
    }

    #[test]
    fn pgd_trace_is_monotone() {
        let x = instance(20, 100, 3, 6);
        for norm in [NormSpec::L2p { p: 1.0 }, NormSpec::L2p { p: 0.5 }, NormSpec::L2p { p: 1.5 }] {
            let r = fit_pgd(&x, 3, norm, &SolverConfig::new(Variant::Pgd)).unwrap();
            assert_eq!(r.monotone_violations, 0, "{norm:?}");
            assert!(r.final_objective() <= r.objective_trace[0]);
            assert_eq!(r.objective_trace.len(), r.iterations + 1);
        }
    }

    #[test]
    fn momentum_first_extrapolation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert_eq!(extrapolate(&w, &w, 1), w);
        let other = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = extrapolate(&w, &other, 1);
        assert!((v - (&w - (&w - &other) * 0.5)).amax() < 1e-15);
    }

    #[test]
    fn momentum_agrees_with_pgd() {
        let x = instance(20, 100, 3, 8);
        let norm = NormSpec::L2p { p: 1.5 };
        let pgd = fit_pgd(&x, 3, norm, &SolverConfig::new(Variant::Pgd)).unwrap();
        let mom = fit_momentum(&x, 3, norm, &SolverConfig::new(Variant::Momentum)).unwrap();
        let rel = (mom.final_objective() - pgd.final_objective()).abs() / pgd.final_objective();
        assert!(rel <= 1e-4, "rel {rel}");
        assert!(mom.iterations < pgd.iterations);
    }

    #[test]
    fn every_iterate_is_orthonormal() {
        let x = instance(12, 80, 3, 9);
        for variant in Variant::ALL {
            let mut worst: f64 = 0.0;
            let mut seen = 0;
            let cfg = SolverConfig::new(variant).with_max_iter(50);
            fit_observed(&x, 3, NormSpec::ElementwiseL1, &cfg, &mut |w| {
                worst = worst.max(w.orthonormality_error());
                seen += 1;
            })
            .unwrap();
            assert!(seen >= 2);
            assert!(worst <= 1e-10 * 3.0, "{variant:?}: {worst}");
        }
    }

    #[test]
    fn fits_are_deterministic() {
        let x = instance(10, 60, 2, 10);
        for variant in Variant::ALL {
            let cfg = SolverConfig::new(variant).with_init(Init::RandomOrthonormal { seed: 77 });
            let a = fit(&x, 2, NormSpec::L2p { p: 0.8 }, &cfg).unwrap();
            let b = fit(&x, 2, NormSpec::L2p { p: 0.8 }, &cfg).unwrap();
            assert_eq!(a.objective_trace, b.objective_trace);
            assert_eq!(a.projection, b.projection);
        }
    }

    #[test]
    fn frobenius_routes_to_vanilla() {
        let x = instance(5, 40, 2, 11);
        let r = fit(&x, 2, NormSpec::FroSquared, &SolverConfig::new(Variant::Pgd)).unwrap();
        assert_eq!(r.objective_trace.len(), 1);
        assert_eq!(r.projection, vanilla_pca(&x, 2).unwrap());
    }

    #[test]
    fn invalid_arguments() {
        let x = instance(5, 40, 2, 12);
        let cfg = SolverConfig::new(Variant::Pgd);
        assert!(fit_pgd(&x, 0, NormSpec::ElementwiseL1, &cfg).is_err());
        assert!(fit_pgd(&x, 6, NormSpec::ElementwiseL1, &cfg).is_err());
        assert!(fit_pgd(&x, 2, NormSpec::L2p { p: 3.0 }, &cfg).is_err());
        assert!(fit_pgd(&x, 2, NormSpec::ElementwiseL1, &cfg.with_tol(0.0)).is_err());
        assert!(fit_pgd(&x, 2, NormSpec::ElementwiseL1, &cfg.with_max_iter(0)).is_err());
    }
}
