use super::{check_ranks, DecompositionResult, FitOptions};
use crate::error::Result;
use crate::forms::{rel_error_values, EfficientForm, TensorTKD};
use crate::linalg::leading_left_vectors;
use crate::tensor::{mode_product_values, unfold_values, Tensor};
use crate::Matrix;

/// `x` multiplied along every mode `n != skip` by `factors[n]^T`.
fn project(x: &Tensor, factors: &[Matrix], skip: Option<usize>) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut shape = x.shape().to_vec();
    let mut values = x.values().to_vec();
    for (n, f) in factors.iter().enumerate() {
        if Some(n) == skip {
            continue;
        }
        let (s, v) = mode_product_values(&shape, &values, &f.transpose(), n)?;
        shape = s;
        values = v;
    }
    Ok((shape, values))
}

fn tucker_form(x: &Tensor, factors: Vec<Matrix>) -> Result<(TensorTKD, f64)> {
    let (shape, values) = project(x, &factors, None)?;
    let core = Tensor::new(shape, values)?;
    let tkd = TensorTKD::new(core, factors, Some(x.modes().to_vec()))?;
    let err = rel_error_values(x.values(), tkd.reconstruct()?.values());
    Ok((tkd, err))
}

/// Truncated higher-order SVD.
pub fn hosvd(x: &Tensor, ranks: &[usize]) -> Result<DecompositionResult> {
    check_ranks(x.shape(), ranks)?;
    let factors = ranks
        .iter()
        .enumerate()
        .map(|(n, &r)| {
            let unf = unfold_values(x.shape(), x.values(), n);
            leading_left_vectors(&unf, r.min(unf.ncols())).map(|u| pad_orthonormal(u, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (tkd, err) = tucker_form(x, factors)?;
    Ok(DecompositionResult {
        form: tkd.into(),
        iterations: 1,
        error_trace: vec![err],
        converged: true,
    })
}

/// Higher-order orthogonal iteration, started from the HOSVD.
///
/// The first sweep's change is measured against the HOSVD error.
pub fn hooi(x: &Tensor, ranks: &[usize], opts: &FitOptions) -> Result<DecompositionResult> {
    opts.validate()?;
    let start = hosvd(x, ranks)?;
    let mut prev = start.rel_error();
    let mut factors = start
        .form
        .as_tkd()
        .expect("hosvd returns a Tucker form")
        .factors()
        .to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut form = None;
    for it in 0..opts.max_iter {
        for n in 0..x.order() {
            let (shape, values) = project(x, &factors, Some(n))?;
            let unf = unfold_values(&shape, &values, n);
            let r = ranks[n];
            factors[n] = pad_orthonormal(leading_left_vectors(&unf, r.min(unf.ncols()))?, r);
        }
        let (tkd, err) = tucker_form(x, factors.clone())?;
        if opts.verbose {
            log::info!("hooi iteration {}: rel_error {err:e}", it + 1);
        }
        trace.push(err);
        form = Some(tkd);
        if (prev - err).abs() < opts.tol {
            converged = true;
            break;
        }
        prev = err;
    }
    Ok(DecompositionResult {
        form: form.expect("at least one sweep").into(),
        iterations: trace.len(),
        error_trace: trace,
        converged,
    })
}

/// Extends orthonormal columns to `r` columns by Gram-Schmidt against the
/// canonical basis. Only needed when an unfolding has fewer columns than
/// the requested rank.
fn pad_orthonormal(u: Matrix, r: usize) -> Matrix {
    let rows = u.nrows();
    if u.ncols() >= r {
        return u;
    }
    let mut out = Matrix::zeros(rows, r);
    out.columns_mut(0, u.ncols()).copy_from(&u);
    let mut filled = u.ncols();
    for e in 0..rows {
        if filled == r {
            break;
        }
        let mut v = nalgebra::DVector::<f64>::zeros(rows);
        v[e] = 1.0;
        for k in 0..filled {
            let c = out.column(k);
            let p = c.dot(&v);
            v -= c * p;
        }
        let nv = v.norm();
        if nv > 1e-8 {
            out.set_column(filled, &(v / nv));
            filled += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::TensorError;

    fn sample() -> Tensor {
        let vals: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        Tensor::new(vec![3, 4, 5], vals).unwrap()
    }

    #[test]
    fn full_rank_is_lossless() {
        let x = sample();
        let res = hosvd(&x, &[3, 4, 5]).unwrap();
        assert!(res.rel_error() <= 1e-10);
        let res = hooi(&x, &[3, 4, 5], &FitOptions::default()).unwrap();
        assert!(res.rel_error() <= 1e-10);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn rank_checks() {
        let x = sample();
        assert!(matches!(hosvd(&x, &[4, 1, 1]), Err(TensorError::Argument(_))));
        assert!(matches!(hosvd(&x, &[1, 1]), Err(TensorError::Argument(_))));
        assert!(matches!(hosvd(&x, &[0, 1, 1]), Err(TensorError::Argument(_))));
    }

    #[test]
    fn pads_short_unfoldings() {
        // mode-0 unfolding of shape (4, 1, 1) has a single column
        let x = Tensor::new(vec![4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let res = hosvd(&x, &[3, 1, 1]).unwrap();
        let a = &res.form.as_tkd().unwrap().factors()[0];
        assert!((a.transpose() * a - Matrix::identity(3, 3)).amax() < 1e-12);
        assert!(res.rel_error() < 1e-12);
    }
}
