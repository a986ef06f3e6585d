mod common;

use proptest::prelude::*;
use tensorkit::linalg::{chol_solve, qr, svd};
use tensorkit::Matrix;

/// `rows x cols` matrix of rank at most `rank`.
fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
    let mut r = common::rng(seed);
    common::gaussian_matrix(rows, rank, &mut r) * common::gaussian_matrix(rank, cols, &mut r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn svd_factors_are_orthonormal(rows in 1usize..12, cols in 1usize..12, rank in 1usize..6, seed in any::<u64>()) {
        let m = low_rank(rows, cols, rank, seed);
        let d = svd(&m).unwrap();
        prop_assert!(common::orthonormality_gap(&d.u) <= 1e-10);
        prop_assert!(common::orthonormality_gap(&d.vt.transpose()) <= 1e-10);
        prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((d.reconstruct() - &m).norm() <= 1e-12 * (1.0 + m.norm()));
    }

    /// Discarding trailing triplets leaves exactly their energy behind.
    #[test]
    fn eckart_young_residual(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let m = common::gaussian_matrix(rows, cols, &mut common::rng(seed));
        let d = svd(&m).unwrap();
        for k in 1..=d.rank() {
            let approx = d.clone().truncate(k).reconstruct();
            let tail: f64 = d.s[k..].iter().map(|s| s * s).sum();
            let resid = (&m - approx).norm_squared();
            prop_assert!((resid - tail).abs() <= 1e-10 * (1.0 + m.norm_squared()));
        }
    }

    #[test]
    fn qr_is_orthonormal(rows in 1usize..10, extra in 0usize..4, seed in any::<u64>()) {
        let cols = rows.saturating_sub(extra).max(1);
        let m = common::gaussian_matrix(rows, cols, &mut common::rng(seed));
        let (q, r) = qr(&m).unwrap();
        prop_assert!(common::orthonormality_gap(&q) <= 1e-10);
        prop_assert!((q * r - &m).amax() <= 1e-12 * (1.0 + m.amax()));
    }

    #[test]
    fn chol_solve_residual(n in 1usize..10, k in 1usize..4, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let g = common::gaussian_matrix(n, n, &mut r);
        let a = &g * g.transpose() + Matrix::identity(n, n);
        let b = common::gaussian_matrix(n, k, &mut r);
        let x = chol_solve(&a, &b).unwrap();
        prop_assert!((&a * x - &b).norm() <= 1e-9 * b.norm());
    }
}

/// Regression: exact zero singular values used to leave the leading
/// triplets inaccurate.
#[test]
fn rank_deficient_wide_matrices_reconstruct() {
    for seed in 0..200 {
        let m = low_rank(4, 90, 2, seed);
        let d = svd(&m).unwrap();
        assert!((d.reconstruct() - &m).norm() <= 1e-12 * m.norm(), "seed {seed}");
    }
}
