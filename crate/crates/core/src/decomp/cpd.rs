use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{seeded_rng, DecompositionResult, FitOptions};
use crate::error::{Result, TensorError};
use crate::forms::{rel_error_values, EfficientForm, TensorCPD};
use crate::linalg::{leading_left_vectors, pinv, svd};
use crate::ops::khatri_rao_list;
use crate::tensor::{unfold_values, Tensor};
use crate::Matrix;

const RCOND: f64 = 1e-12;

/// Leading left singular vectors of `unfolding`, padded with Gaussian columns
/// when `rank` exceeds what the SVD provides.
pub(crate) fn init_factor(unfolding: &Matrix, rank: usize, rng: &mut impl Rng) -> Result<Matrix> {
    let rows = unfolding.nrows();
    let d = svd(unfolding)?;
    let take = rank.min(d.rank());
    let mut a = Matrix::zeros(rows, rank);
    a.columns_mut(0, take).copy_from(&d.u.columns(0, take));
    for r in take..rank {
        for i in 0..rows {
            a[(i, r)] = StandardNormal.sample(rng);
        }
    }
    Ok(a)
}

/// Generalised-eigenvalue start for order >= 3 tensors when the rank fits
/// inside the first two modes.
///
/// Treats the tensor as `I_0 x I_1 x K` (remaining modes merged), compresses
/// two random mixtures of the frontal slices onto the leading singular
/// subspaces of modes 0 and 1, and reads the mode-0/mode-1 factors off the
/// eigenvectors of the resulting `R x R` pencil. The merged factor comes from
/// one least-squares solve and is split into per-mode vectors by rank-one
/// approximation. Exact for noise-free data of the fitted rank; returns
/// `None` whenever the pencil has complex or non-finite eigenstructure.
fn pencil_init(x: &Tensor, unfoldings: &[Matrix], rank: usize, rng: &mut impl Rng) -> Option<Vec<Matrix>> {
    let shape = x.shape();
    if shape.len() < 3 || rank > shape[0] || rank > shape[1] {
        return None;
    }
    let (i0, i1) = (shape[0], shape[1]);
    let k: usize = shape[2..].iter().product();
    if k < 2 {
        return None;
    }
    let u = leading_left_vectors(&unfoldings[0], rank).ok()?;
    let v = leading_left_vectors(&unfoldings[1], rank).ok()?;
    let vals = x.values();
    let mut mixtures = Vec::with_capacity(2);
    for _ in 0..2 {
        let w: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let mut s = Matrix::zeros(i0, i1);
        for a in 0..i0 {
            for b in 0..i1 {
                let base = (a * i1 + b) * k;
                s[(a, b)] = vals[base..base + k].iter().zip(&w).map(|(x, w)| x * w).sum();
            }
        }
        mixtures.push(u.transpose() * s * &v);
    }
    let t2_inv = mixtures[1].clone().try_inverse()?;
    let left = &mixtures[0] * &t2_inv;
    let right = (&t2_inv * &mixtures[0]).transpose();
    let eig = left.eigenvalues()?;
    if eig.iter().any(|e| !e.is_finite()) {
        return None;
    }
    let null_vector = |m: &Matrix, lambda: f64| -> Option<nalgebra::DVector<f64>> {
        let shifted = m - Matrix::identity(rank, rank) * lambda;
        let d = svd(&shifted).ok()?;
        Some(d.vt.row(rank - 1).transpose())
    };
    let mut a_small = Matrix::zeros(rank, rank);
    let mut b_small = Matrix::zeros(rank, rank);
    for (r, &lambda) in eig.iter().enumerate() {
        a_small.set_column(r, &null_vector(&left, lambda)?);
        b_small.set_column(r, &null_vector(&right, lambda)?);
    }
    let a = u * a_small;
    let b = v * b_small;

    // merged factor: the third-mode ALS solve of the I_0 x I_1 x K view
    let merged_unfolding = Matrix::from_fn(k, i0 * i1, |kk, c| {
        let (a_i, b_i) = (c % i0, c / i0);
        vals[(a_i * i1 + b_i) * k + kk]
    });
    let kr = crate::ops::khatri_rao(&b, &a).ok()?;
    let g = (b.transpose() * &b).component_mul(&(a.transpose() * &a));
    let w = merged_unfolding * kr * pinv(&g, RCOND).ok()?;

    let rest = &shape[2..];
    let mut factors = vec![a, b];
    factors.extend(rest.iter().map(|&d| Matrix::zeros(d, rank)));
    for r in 0..rank {
        let col: Vec<f64> = w.column(r).iter().copied().collect();
        for (m, &d) in rest.iter().enumerate() {
            let f = if rest.len() == 1 {
                nalgebra::DVector::from_vec(col.clone())
            } else {
                let unf = unfold_values(rest, &col, m);
                leading_left_vectors(&unf, 1).ok()?.column(0).into_owned()
            };
            debug_assert_eq!(f.len(), d);
            factors[2 + m].set_column(r, &f);
        }
    }
    if factors.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
        return None;
    }
    Some(factors)
}

/// Starting factors: the pencil start when it applies, otherwise the
/// leading left singular vectors of every unfolding.
pub(crate) fn initial_factors(
    x: &Tensor,
    unfoldings: &[Matrix],
    rank: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Matrix>> {
    if let Some(f) = pencil_init(x, unfoldings, rank, rng) {
        return Ok(f);
    }
    unfoldings.iter().map(|u| init_factor(u, rank, rng)).collect()
}

/// Splits a matrix into unit-norm columns and their norms. Zero columns stay
/// zero with norm 0.
pub(crate) fn normalise_columns(mut a: Matrix) -> (Matrix, Vec<f64>) {
    let mut norms = Vec::with_capacity(a.ncols());
    for mut c in a.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
        norms.push(n);
    }
    (a, norms)
}

/// Khatri-Rao product of every factor except `skip`, highest mode first, so
/// its rows line up with the columns of the Kolda-Bader unfolding.
fn khatri_rao_except(factors: &[Matrix], skip: usize) -> Result<Matrix> {
    let mats: Vec<&Matrix> = factors
        .iter()
        .enumerate()
        .rev()
        .filter(|&(k, _)| k != skip)
        .map(|(_, f)| f)
        .collect();
    khatri_rao_list(&mats)
}

/// Gram matrix of the Khatri-Rao product via the Hadamard identity.
fn gram_except(factors: &[Matrix], skip: usize) -> Matrix {
    let rank = factors[0].ncols();
    let mut g = Matrix::from_element(rank, rank, 1.0);
    for (k, f) in factors.iter().enumerate() {
        if k != skip {
            g.component_mul_assign(&(f.transpose() * f));
        }
    }
    g
}

/// Least-squares update of factor `n`: `X_(n) * KR * pinv(gram)`.
pub(crate) fn als_update(unfolding: &Matrix, factors: &[Matrix], n: usize) -> Result<Matrix> {
    let kr = khatri_rao_except(factors, n)?;
    let g = gram_except(factors, n);
    Ok(unfolding * kr * pinv(&g, RCOND)?)
}

/// Same update solved on a subset of the Khatri-Rao rows. `rows` are column
/// indices of the unfolding; `None` uses every row.
fn sampled_update(
    unfolding: &Matrix,
    factors: &[Matrix],
    n: usize,
    shape: &[usize],
    rows: Option<&[usize]>,
) -> Result<Matrix> {
    let rank = factors[0].ncols();
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..unfolding.ncols()).collect();
            &all
        }
    };
    let mut kr = Matrix::zeros(rows.len(), rank);
    let mut xs = Matrix::zeros(unfolding.nrows(), rows.len());
    for (s, &c) in rows.iter().enumerate() {
        xs.set_column(s, &unfolding.column(c));
        // decode the column index: lower modes vary fastest
        let mut rem = c;
        let mut row = vec![1.0; rank];
        for (k, &dim) in shape.iter().enumerate() {
            if k == n {
                continue;
            }
            let i = rem % dim;
            rem /= dim;
            for (r, v) in row.iter_mut().enumerate() {
                *v *= factors[k][(i, r)];
            }
        }
        for (r, v) in row.into_iter().enumerate() {
            kr[(s, r)] = v;
        }
    }
    let g = kr.transpose() * &kr;
    Ok(xs * kr * pinv(&g, RCOND)?)
}

fn check_cpd_args(x: &Tensor, rank: usize, opts: &FitOptions) -> Result<()> {
    opts.validate()?;
    if rank < 1 {
        return Err(TensorError::Argument("rank must be >= 1".into()));
    }
    if x.order() < 2 {
        return Err(TensorError::Dimension(
            "CPD needs a tensor of order >= 2".into(),
        ));
    }
    Ok(())
}

fn run_als(
    x: &Tensor,
    rank: usize,
    opts: &FitOptions,
    mut update: impl FnMut(usize, &Matrix, &[Matrix], &mut rand_chacha::ChaCha8Rng) -> Result<Matrix>,
) -> Result<DecompositionResult> {
    let order = x.order();
    let unfoldings = (0..order)
        .map(|n| x.unfold_matrix(n))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded_rng(opts.seed);
    let mut factors = initial_factors(x, &unfoldings, rank, &mut rng)?;
    let mut weights = vec![1.0; rank];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;

    for it in 0..opts.max_iter {
        for n in 0..order {
            let a = update(n, &unfoldings[n], &factors, &mut rng)?;
            let (a, norms) = normalise_columns(a);
            factors[n] = a;
            weights = norms;
        }
        let cpd = TensorCPD::new(weights.clone(), factors.clone(), Some(x.modes().to_vec()))?;
        let err = rel_error_values(x.values(), cpd.reconstruct()?.values());
        if !err.is_finite() {
            return Err(TensorError::Numeric(format!(
                "CPD diverged at iteration {}",
                it + 1
            )));
        }
        if opts.verbose {
            log::info!("cpd iteration {}: rel_error {err:e}", it + 1);
        }
        let prev = trace.last().copied();
        trace.push(err);
        if prev.is_some_and(|p| (p - err).abs() < opts.tol) {
            converged = true;
            break;
        }
    }
    let form = TensorCPD::new(weights, factors, Some(x.modes().to_vec()))?.normalised();
    Ok(DecompositionResult {
        form: form.into(),
        iterations: trace.len(),
        error_trace: trace,
        converged,
    })
}

/// CP decomposition by alternating least squares.
///
/// Factors start from the leading left singular vectors of each unfolding.
/// Stops when the relative error changes by less than `opts.tol` between
/// sweeps or after `opts.max_iter` sweeps.
pub fn cpd_als(x: &Tensor, rank: usize, opts: &FitOptions) -> Result<DecompositionResult> {
    check_cpd_args(x, rank, opts)?;
    run_als(x, rank, opts, |n, unf, factors, _| als_update(unf, factors, n))
}

/// CP-ALS where each mode's least-squares problem is solved on
/// `sample_size` Khatri-Rao rows drawn uniformly with replacement.
///
/// A mode whose row count does not exceed `sample_size` is solved on all of
/// its rows, which makes the method coincide with [`cpd_als`] when every
/// mode is small enough.
pub fn cpd_randomized(
    x: &Tensor,
    rank: usize,
    sample_size: usize,
    opts: &FitOptions,
) -> Result<DecompositionResult> {
    check_cpd_args(x, rank, opts)?;
    if sample_size < rank {
        return Err(TensorError::Argument(format!(
            "sample_size {sample_size} is smaller than rank {rank}"
        )));
    }
    let shape = x.shape().to_vec();
    run_als(x, rank, opts, |n, unf, factors, rng| {
        let total = unf.ncols();
        if sample_size >= total {
            sampled_update(unf, factors, n, &shape, None)
        } else {
            let rows: Vec<usize> = (0..sample_size).map(|_| rng.random_range(0..total)).collect();
            sampled_update(unf, factors, n, &shape, Some(&rows))
        }
    })
}
