//! Randomized invariants over the public API.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_pca::eval::principal_angles;
use robust_pca::linalg::{procrustes_project, random_orthonormal, DataMatrix};
use robust_pca::objectives::{objective_value, residual, weights_l1, DEFAULT_EPS};
use robust_pca::NormSpec;

/// (m, n, k, entries) with 1 <= k < m.
fn instance() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, u64)> {
    (2usize..12, 1usize..30).prop_flat_map(|(m, n)| (Just(m), Just(n), 1..m, prop::collection::vec(-10.0f64..10.0, m * n), any::<u64>()))
}

fn norms() -> impl Strategy<Value = NormSpec> {
    prop_oneof![Just(NormSpec::FroSquared), Just(NormSpec::ElementwiseL1), (0.1f64..=2.0).prop_map(|p| NormSpec::L2p { p })]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn procrustes_output_is_orthonormal((m, _n, k, v, _s) in instance()) {
        let r = DMatrix::from_fn(m, k, |i, j| v[(i + j * m) % v.len()]);
        prop_assume!(r.singular_values().min() > 1e-6);
        let w = procrustes_project(&r).unwrap();
        prop_assert!(w.orthonormality_error() <= 1e-12);
    }

    #[test]
    fn objective_is_invariant_to_basis_rotation((m, n, k, v, seed) in instance(), spec in norms()) {
        let x = DataMatrix::new(DMatrix::from_column_slice(m, n, &v)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_orthonormal(m, k, &mut rng).unwrap();
        let q = random_orthonormal(k, k, &mut rng).unwrap();
        let rotated = robust_pca::Projection::new(w.values() * q.values()).unwrap();
        let a = objective_value(&x, &w, spec).unwrap();
        let b = objective_value(&x, &rotated, spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn l1_surrogate_matches_l1_norm((m, n, k, v, seed) in instance()) {
        let x = DataMatrix::new(DMatrix::from_column_slice(m, n, &v)).unwrap();
        let w = random_orthonormal(m, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let y = residual(&x, &w).unwrap();
        prop_assume!(y.column_norms().iter().all(|&c| c > 1e-3));
        let d = weights_l1(&y, DEFAULT_EPS);
        let surrogate: f64 = y.column_norms().iter().zip(d.entries()).map(|(c, w)| c * c * w).sum();
        let l1 = objective_value(&x, &w, NormSpec::ElementwiseL1).unwrap();
        prop_assert!((surrogate - l1).abs() <= 1e-10 * l1);
    }

    #[test]
    fn principal_angles_are_symmetric_and_bounded(m in 2usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1 + (seed as usize) % (m - 1);
        let a = random_orthonormal(m, k, &mut rng).unwrap();
        let b = random_orthonormal(m, k, &mut rng).unwrap();
        let ab = principal_angles(&a, &b).unwrap();
        let ba = principal_angles(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(x));
            prop_assert!((x - y).abs() <= 1e-7);
        }
        prop_assert!(principal_angles(&a, &a).unwrap().iter().all(|&t| t < 1e-6));
    }
}
