mod common;

use proptest::prelude::*;
use tensorkit::ops::{frobenius_norm, inner, khatri_rao};
use tensorkit::{Matrix, Mode, Tensor};

fn shape_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_order)
}

fn with_features(x: Tensor) -> Tensor {
    let modes = x
        .shape()
        .iter()
        .enumerate()
        .map(|(n, &d)| Mode::with_features(format!("m{n}"), (0..d).map(|i| format!("{n}:{i}")).collect()))
        .collect();
    x.with_modes(modes).unwrap()
}

/// Column of the mode-`n` unfolding that holds `idx`: remaining modes in
/// ascending order, earliest fastest.
fn unfolding_column(idx: &[usize], shape: &[usize], n: usize) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for (k, (&i, &d)) in idx.iter().zip(shape).enumerate() {
        if k != n {
            col += i * stride;
            stride *= d;
        }
    }
    col
}

#[test]
fn unfolding_matches_enumerated_ordering() {
    for a in 1..=3 {
        for b in 1..=3 {
            for c in 1..=3 {
                let shape = [a, b, c];
                let x = common::gaussian_tensor(&shape, &mut common::rng((a * 9 + b * 3 + c) as u64));
                for n in 0..3 {
                    let m = x.unfold_matrix(n).unwrap();
                    for idx in common::all_indices(&shape) {
                        let col = unfolding_column(&idx, &shape, n);
                        assert_eq!(m[(idx[n], col)].to_bits(), x.get(&idx).unwrap().to_bits());
                    }
                }
            }
        }
    }
}

#[test]
fn zero_norm_only_for_zero_tensor() {
    let z = Tensor::zeros(vec![2, 3]).unwrap();
    assert_eq!(frobenius_norm(&z), 0.0);
    let mut vals = vec![0.0; 6];
    vals[4] = 1e-300;
    let t = Tensor::new(vec![2, 3], vals).unwrap();
    assert!(inner(&t, &t).unwrap() >= 0.0);
    assert_eq!(frobenius_norm(&t), 1e-300);
    let big = Tensor::new(vec![2], vec![3e200, 4e200]).unwrap();
    assert!((frobenius_norm(&big) / 5e200 - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fold_undoes_unfold(shape in shape_strategy(5, 5), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let x = with_features(common::gaussian_tensor(&shape, &mut common::rng(seed)));
        let n = pick.index(shape.len());
        let back = x.unfold(n).unwrap().fold().unwrap();
        prop_assert_eq!(&back, &x);
        prop_assert!(back.values().iter().zip(x.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn fold_undoes_vectorise(shape in shape_strategy(5, 5), seed in any::<u64>()) {
        let x = with_features(common::gaussian_tensor(&shape, &mut common::rng(seed)));
        let v = x.vectorise();
        prop_assert_eq!(v.values(), x.values());
        prop_assert_eq!(v.fold().unwrap(), x);
    }

    #[test]
    fn identity_mode_product(shape in shape_strategy(4, 5), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let x = common::gaussian_tensor(&shape, &mut common::rng(seed));
        let n = pick.index(shape.len());
        let y = x.mode_n_product(&Matrix::identity(shape[n], shape[n]), n).unwrap();
        prop_assert_eq!(y.shape(), x.shape());
        prop_assert_eq!(y.values(), x.values());
    }

    #[test]
    fn mode_product_matches_index_sum(shape in shape_strategy(4, 4), rows in 1usize..4, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut r = common::rng(seed);
        let x = common::gaussian_tensor(&shape, &mut r);
        let n = pick.index(shape.len());
        let m = common::gaussian_matrix(rows, shape[n], &mut r);
        let y = x.mode_n_product(&m, n).unwrap();
        let mut out_shape = shape.clone();
        out_shape[n] = rows;
        prop_assert_eq!(y.shape(), out_shape.as_slice());
        for idx in common::all_indices(&out_shape) {
            let mut want = 0.0;
            let mut src = idx.clone();
            for k in 0..shape[n] {
                src[n] = k;
                want += m[(idx[n], k)] * x.get(&src).unwrap();
            }
            prop_assert!((y.get(&idx).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn khatri_rao_gram_identity(i in 1usize..7, j in 1usize..7, r in 1usize..5, seed in any::<u64>()) {
        let mut g = common::rng(seed);
        let a = common::gaussian_matrix(i, r, &mut g);
        let b = common::gaussian_matrix(j, r, &mut g);
        let kr = khatri_rao(&a, &b).unwrap();
        let lhs = kr.transpose() * &kr;
        let rhs = (a.transpose() * &a).component_mul(&(b.transpose() * &b));
        prop_assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
    }

    #[test]
    fn squared_norm_is_self_inner(shape in shape_strategy(4, 5), seed in any::<u64>()) {
        let x = common::gaussian_tensor(&shape, &mut common::rng(seed));
        let ip = inner(&x, &x).unwrap();
        let n = frobenius_norm(&x);
        prop_assert!(ip > 0.0);
        prop_assert!((n * n - ip).abs() <= 1e-12 * ip);
    }
}
