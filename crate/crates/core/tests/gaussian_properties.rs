mod common;

use proptest::prelude::*;
use tensorkit::decomp::FitOptions;
use tensorkit::gaussian::{dof_ratio, fit, fit_flip_flop, logpdf, sample, FlipFlopOptions, TensorNormal};
use tensorkit::{Matrix, Tensor};

fn logdet(m: &Matrix) -> f64 {
    let l = m.clone().cholesky().expect("SPD").l();
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

fn model(shape: &[usize], seed: u64) -> TensorNormal {
    let mut r = common::rng(seed);
    let factors = shape.iter().map(|&d| common::spd(d, &mut r)).collect();
    TensorNormal::new(common::gaussian_tensor(shape, &mut r), factors).unwrap()
}

#[test]
fn logdet_of_kronecker_product() {
    for (i, shape) in [vec![2, 3], vec![4, 4, 4], vec![2, 2, 2, 2, 2, 2], vec![8, 8], vec![3, 5, 2]]
        .iter()
        .enumerate()
    {
        let m = model(shape, i as u64);
        let p: usize = shape.iter().product();
        let sep: f64 = m
            .factors()
            .iter()
            .map(|f| (p / f.nrows()) as f64 * logdet(f))
            .sum();
        let dense = logdet(&common::kron_all(m.factors()));
        assert!((sep - dense).abs() <= 1e-9 * (1.0 + dense.abs()), "{shape:?}: {sep} vs {dense}");
    }
}

#[test]
fn scalar_and_isotropic_cases() {
    let std = TensorNormal::standard(&[1]).unwrap();
    let x = Tensor::new(vec![1], vec![0.0]).unwrap();
    assert!((logpdf(&std, &x).unwrap() + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);

    let iso = TensorNormal::standard(&[2, 3]).unwrap();
    let x = common::gaussian_tensor(&[2, 3], &mut common::rng(3));
    let sq: f64 = x.values().iter().map(|v| v * v).sum();
    let want = -0.5 * (6.0 * (2.0 * std::f64::consts::PI).ln() + sq);
    assert!((logpdf(&iso, &x).unwrap() - want).abs() < 1e-12);
}

/// The empirical covariance of row-major `vec(X)` must match
/// `Σ_1 ⊗ Σ_2` and not the reversed product.
#[test]
fn sample_covariance_follows_row_major_kronecker_order() {
    let s1 = Matrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 1.0]);
    let s2 = Matrix::from_row_slice(3, 3, &[1.0, -0.4, 0.0, -0.4, 1.5, 0.3, 0.0, 0.3, 0.6]);
    let m = TensorNormal::new(Tensor::zeros(vec![2, 3]).unwrap(), vec![s1.clone(), s2.clone()]).unwrap();
    let k = 40_000;
    let draws = sample(&m, k, 2024).unwrap();
    let mut cov = Matrix::zeros(6, 6);
    for d in &draws {
        let v = nalgebra::DVector::from_column_slice(d.values());
        cov += &v * v.transpose();
    }
    cov /= k as f64;
    let right = common::kron_all(&[s1.clone(), s2.clone()]);
    let wrong = common::kron_all(&[s2, s1]);
    // standard error of each entry is below sqrt(2 * 2 * 1.5 / k) ~ 0.012
    assert!((&cov - &right).amax() < 0.06, "{}", (&cov - &right).amax());
    assert!((&cov - &wrong).amax() > 0.5);
}

#[test]
fn fit_recovers_factors_up_to_scale() {
    let truth = model(&[3, 4], 11);
    let draws = sample(&truth, 2000, 5).unwrap();
    let est = fit(&draws, &FitOptions::default()).unwrap();
    // the split of scale between factors is arbitrary; align each factor
    // by its least-squares multiple before comparing
    for (a, b) in est.factors().iter().zip(truth.factors()) {
        let scale = a.dot(b) / a.norm_squared();
        let rel = (a * scale - b).norm() / b.norm();
        assert!(rel < 0.10, "relative factor error {rel}");
    }
    // the product, which is identifiable, agrees without alignment
    let prod_est = common::kron_all(est.factors());
    let prod_true = common::kron_all(truth.factors());
    assert!((prod_est - &prod_true).norm() / prod_true.norm() < 0.10);
}

#[test]
fn fitted_model_scores_held_out_points_like_the_truth() {
    let truth = model(&[2, 3, 2], 21);
    let train = sample(&truth, 3000, 1).unwrap();
    let est = fit(&train, &FitOptions::default()).unwrap();
    let held_out = sample(&truth, 300, 2).unwrap();
    let mean_gap: f64 = held_out
        .iter()
        .map(|x| (logpdf(&est, x).unwrap() - logpdf(&truth, x).unwrap()).abs())
        .sum::<f64>()
        / held_out.len() as f64;
    // 12 dimensions, 3000 samples: the average per-point gap is a few hundredths
    assert!(mean_gap < 0.15, "mean |log-density gap| {mean_gap}");
}

/// A size-1 mode still carries its own variance in the separable count, so
/// the ratio can exceed 1 once such a mode is present.
#[test]
fn unit_modes_are_counted_literally() {
    let d = dof_ratio(&[1, 1]).unwrap();
    assert_eq!((d.eta_tensor, d.eta_multi), (3, 2));
    let d = dof_ratio(&[1, 5]).unwrap();
    assert_eq!((d.eta_tensor, d.eta_multi), (21, 20));
    assert_eq!(dof_ratio(&[7]).unwrap().ratio, 1.0);
}

#[test]
fn sampling_errors_and_determinism() {
    let m = model(&[2, 2], 0);
    assert!(sample(&m, 0, 1).is_err());
    assert_eq!(sample(&m, 3, 9).unwrap(), sample(&m, 3, 9).unwrap());
    assert!(fit(&sample(&m, 1, 0).unwrap(), &FitOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn likelihood_trace_does_not_decrease(seed in any::<u64>(), count in 3usize..30) {
        let truth = model(&[3, 2, 3], seed);
        let draws = sample(&truth, count, seed).unwrap();
        let opts = FlipFlopOptions { fit: FitOptions::default().with_tol(1e-12), ridge: 0.0 };
        match fit_flip_flop(&draws, &opts) {
            Ok(res) => {
                let t = &res.loglik_trace;
                prop_assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{:?}", t);
            }
            // too few samples for a non-singular update is a documented failure
            Err(e) => prop_assert!(matches!(e, tensorkit::TensorError::Numeric(_)), "{e}"),
        }
    }

    #[test]
    fn ratio_is_at_most_one(shape in prop::collection::vec(2usize..12, 1..5)) {
        let d = dof_ratio(&shape).unwrap();
        prop_assert!(d.ratio > 0.0 && d.ratio <= 1.0);
        prop_assert!(d.eta_tensor <= d.eta_multi);
    }
}
