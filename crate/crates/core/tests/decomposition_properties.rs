mod common;

use proptest::prelude::*;
use tensorkit::decomp::{cpd_als, cpd_randomized, hooi, hosvd, tt_svd, FitOptions, TtTarget};
use tensorkit::linalg::svd;
use tensorkit::{EfficientForm, Matrix, Tensor, TensorCPD};

fn outer3(a: &[f64], b: &[f64], c: &[f64]) -> Tensor {
    let vals = a
        .iter()
        .flat_map(|x| b.iter().flat_map(move |y| c.iter().map(move |z| x * y * z)))
        .collect();
    Tensor::new(vec![a.len(), b.len(), c.len()], vals).unwrap()
}

#[test]
fn known_rank_one_factors() {
    let x = outer3(&[1.0, 2.0], &[1.0, 1.0], &[1.0, -1.0]);
    let res = cpd_als(&x, 1, &FitOptions::default()).unwrap();
    assert!(res.rel_error() <= 1e-10 && res.converged);
    // the weight is the product of the factor norms
    let w = res.form.as_cpd().unwrap().weights()[0];
    assert!((w - 5f64.sqrt() * 2f64.sqrt() * 2f64.sqrt()).abs() < 1e-10);

    let y = outer3(&[1.0, -2.0, 0.5], &[3.0, 1.0, 1.0], &[0.2, 1.0, -1.0]);
    let res = cpd_randomized(&y, 1, 9, &FitOptions::default()).unwrap();
    assert!(res.rel_error() <= 1e-6);
    let res = hosvd(&y, &[1, 1, 1]).unwrap();
    assert!(res.rel_error() <= 1e-10);
    let res = tt_svd(&y, &TtTarget::Eps(1e-10)).unwrap();
    assert_eq!(res.form.as_tt().unwrap().ranks(), vec![1, 1, 1, 1]);
    assert!(res.rel_error() <= 1e-10);
}

#[test]
fn order_two_tt_is_the_svd() {
    let m = common::gaussian_matrix(4, 6, &mut common::rng(9));
    let x = Tensor::from_matrix(&m);
    let res = tt_svd(&x, &TtTarget::Eps(1e-12)).unwrap();
    let tt = res.form.as_tt().unwrap();
    let d = svd(&m).unwrap();
    let first = &tt.cores()[0];
    let k = first.shape()[2];
    assert_eq!(k, 4);
    let u = Matrix::from_row_slice(4, k, first.values());
    for j in 0..k {
        let dot = u.column(j).dot(&d.u.column(j));
        assert!((dot.abs() - 1.0).abs() < 1e-10, "column {j}");
    }
    assert!(res.rel_error() <= 1e-10);
}

#[test]
fn hosvd_factors_are_orthonormal() {
    for seed in 0..10 {
        let x = common::gaussian_tensor(&[5, 4, 6], &mut common::rng(seed));
        for form in [
            hosvd(&x, &[3, 2, 4]).unwrap().form,
            hooi(&x, &[3, 2, 4], &FitOptions::default()).unwrap().form,
        ] {
            for f in form.as_tkd().unwrap().factors() {
                assert!(common::orthonormality_gap(f) <= 1e-10);
            }
        }
    }
}

#[test]
fn bad_arguments() {
    let x = common::gaussian_tensor(&[3, 3, 3], &mut common::rng(0));
    let v = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
    assert!(cpd_als(&x, 0, &FitOptions::default()).is_err());
    assert!(cpd_als(&v, 1, &FitOptions::default()).is_err());
    assert!(cpd_randomized(&x, 3, 2, &FitOptions::default()).is_err());
    assert!(hosvd(&x, &[4, 1, 1]).is_err());
    assert!(tt_svd(&x, &TtTarget::Ranks(vec![1])).is_err());
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn form_bits(f: &tensorkit::Form) -> Vec<f64> {
    f.reconstruct().unwrap().into_values()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn als_traces_do_not_increase(seed in any::<u64>(), rank in 1usize..4) {
        let x = common::gaussian_tensor(&[4, 5, 3], &mut common::rng(seed));
        let opts = FitOptions::default().with_seed(seed);
        for trace in [
            cpd_als(&x, rank, &opts).unwrap().error_trace,
            hooi(&x, &[rank, rank, rank], &opts).unwrap().error_trace,
        ] {
            prop_assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", trace);
        }
    }

    #[test]
    fn fits_are_deterministic(seed in any::<u64>()) {
        let x = common::gaussian_tensor(&[4, 3, 5], &mut common::rng(seed));
        let opts = FitOptions::default().with_seed(seed).with_max_iter(10);
        let runs = [
            (cpd_als(&x, 2, &opts).unwrap(), cpd_als(&x, 2, &opts).unwrap()),
            (cpd_randomized(&x, 2, 6, &opts).unwrap(), cpd_randomized(&x, 2, 6, &opts).unwrap()),
            (hooi(&x, &[2, 2, 2], &opts).unwrap(), hooi(&x, &[2, 2, 2], &opts).unwrap()),
            (tt_svd(&x, &TtTarget::Eps(0.2)).unwrap(), tt_svd(&x, &TtTarget::Eps(0.2)).unwrap()),
        ];
        for (a, b) in &runs {
            prop_assert!(same_bits(&a.error_trace, &b.error_trace));
            prop_assert!(same_bits(&form_bits(&a.form), &form_bits(&b.form)));
        }
    }

    #[test]
    fn tt_budget_is_respected(shape in prop::collection::vec(1usize..=6, 1..=4), eps in 0.001f64..0.9, seed in any::<u64>()) {
        let x = common::gaussian_tensor(&shape, &mut common::rng(seed));
        let res = tt_svd(&x, &TtTarget::Eps(eps)).unwrap();
        let rec = res.form.reconstruct().unwrap();
        prop_assert!(common::rel_diff(x.values(), rec.values()) <= eps);
    }

    #[test]
    fn normalised_cpd_reconstructs_the_same(seed in any::<u64>()) {
        let (x, _) = common::low_rank_cpd(&[3, 4, 2], 2, seed);
        let res = cpd_als(&x, 2, &FitOptions::default()).unwrap();
        let c: &TensorCPD = res.form.as_cpd().unwrap();
        prop_assert!(c.is_normalised(1e-12));
        let again = c.normalised().reconstruct().unwrap();
        prop_assert!(common::rel_diff(c.reconstruct().unwrap().values(), again.values()) <= 1e-12);
    }
}
