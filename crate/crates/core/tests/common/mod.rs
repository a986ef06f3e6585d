#![allow(dead_code)]

pub mod golden;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tensorkit::{EfficientForm, Matrix, Tensor, TensorCPD, TensorTKD};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let size = shape.iter().product();
    let values = (0..size).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), values).unwrap()
}

/// Sum of `rank` random rank-one terms.
pub fn low_rank_cpd(shape: &[usize], rank: usize, seed: u64) -> (Tensor, Vec<Matrix>) {
    let mut r = rng(seed);
    let factors: Vec<Matrix> = shape.iter().map(|&d| gaussian_matrix(d, rank, &mut r)).collect();
    let x = TensorCPD::new(vec![1.0; rank], factors.clone(), None)
        .unwrap()
        .reconstruct()
        .unwrap();
    (x, factors)
}

/// Random Tucker tensor with the given multilinear ranks.
pub fn low_rank_tucker(shape: &[usize], ranks: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    let core = gaussian_tensor(ranks, &mut r);
    let factors = shape
        .iter()
        .zip(ranks)
        .map(|(&d, &k)| gaussian_matrix(d, k, &mut r))
        .collect();
    TensorTKD::new(core, factors, None).unwrap().reconstruct().unwrap()
}

/// Brute-force dense Frobenius distance, independent of the library.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den
}

/// Slices `X_k = P_k H diag(s_k) V^T` drawn exactly from the PARAFAC2 model.
///
/// `H^T H` has unit diagonal and a common off-diagonal congruence in
/// `[0, 0.7)`, slice weights are uniform in `[0.5, 1.5)`, `V` is Gaussian and
/// each `P_k` has orthonormal columns.
pub fn parafac2_model(rows: &[usize], cols: usize, rank: usize, seed: u64) -> Vec<Matrix> {
    use rand::Rng;
    let mut r = rng(seed);
    let rho: f64 = r.random_range(0.0..0.7);
    let phi = Matrix::from_fn(rank, rank, |i, j| if i == j { 1.0 } else { rho });
    let h = phi.cholesky().expect("congruence matrix is positive definite").l().transpose();
    let v = gaussian_matrix(cols, rank, &mut r);
    rows.iter()
        .map(|&j| {
            let q = gaussian_matrix(j, rank, &mut r).qr().q();
            let mut hs = h.clone();
            for c in 0..rank {
                hs.column_mut(c).scale_mut(r.random_range(0.5..1.5));
            }
            q * hs * v.transpose()
        })
        .collect()
}

/// `count` samples `X = s u∘v + noise` with a shared unit pattern `u∘v`,
/// `|s|` uniform in `[0.5, 1.5)` and label `sign(s)`; classes alternate.
pub fn shared_pattern_dataset(count: usize, shape: &[usize], sigma: f64, seed: u64) -> (Vec<Tensor>, Vec<i8>) {
    use rand::Rng;
    let mut r = rng(seed);
    let pattern = unit_rank_one(shape, &mut r);
    let mut samples = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let s = f64::from(label) * r.random_range(0.5..1.5);
        samples.push(noisy(shape, &pattern, s, sigma, &mut r));
        labels.push(label);
    }
    (samples, labels)
}

/// `count` samples `X = a P_y + noise` where each class has its own unit
/// rank-one pattern `P_y` and `a` is uniform in `[0.5, 1.5)`.
pub fn class_pattern_dataset(count: usize, shape: &[usize], sigma: f64, seed: u64) -> (Vec<Tensor>, Vec<i8>) {
    use rand::Rng;
    let mut r = rng(seed);
    let pos = unit_rank_one(shape, &mut r);
    let neg = unit_rank_one(shape, &mut r);
    let mut samples = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let a = r.random_range(0.5..1.5);
        samples.push(noisy(shape, if label > 0 { &pos } else { &neg }, a, sigma, &mut r));
        labels.push(label);
    }
    (samples, labels)
}

fn unit_rank_one(shape: &[usize], r: &mut ChaCha8Rng) -> Vec<f64> {
    let mut vals = vec![1.0];
    for &d in shape {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(r)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        vals = vals.iter().flat_map(|a| v.iter().map(move |b| a * b / n)).collect();
    }
    vals
}

fn noisy(shape: &[usize], pattern: &[f64], scale: f64, sigma: f64, r: &mut ChaCha8Rng) -> Tensor {
    let vals = pattern
        .iter()
        .map(|p| {
            let e: f64 = StandardNormal.sample(r);
            scale * p + sigma * e
        })
        .collect();
    Tensor::new(shape.to_vec(), vals).unwrap()
}

/// Row-major multi-index of a flat offset.
pub fn multi_index(mut offset: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for n in (0..shape.len()).rev() {
        idx[n] = offset % shape[n];
        offset /= shape[n];
    }
    idx
}

/// Every multi-index of `shape` in row-major order.
pub fn all_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let size: usize = shape.iter().product();
    (0..size).map(|o| multi_index(o, shape)).collect()
}

/// Largest entry of `|A^T A - I|`.
pub fn orthonormality_gap(a: &Matrix) -> f64 {
    (a.transpose() * a - Matrix::identity(a.ncols(), a.ncols())).amax()
}

/// Well-conditioned random symmetric positive-definite matrix.
pub fn spd(n: usize, r: &mut ChaCha8Rng) -> Matrix {
    let a = gaussian_matrix(n, n, r);
    &a * a.transpose() / n as f64 + Matrix::identity(n, n) * 0.5
}

/// `factors[0] ⊗ factors[1] ⊗ ...`, entry by entry.
pub fn kron_all(factors: &[Matrix]) -> Matrix {
    let mut out = Matrix::identity(1, 1);
    for f in factors {
        let mut k = Matrix::zeros(out.nrows() * f.nrows(), out.ncols() * f.ncols());
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                for p in 0..f.nrows() {
                    for q in 0..f.ncols() {
                        k[(i * f.nrows() + p, j * f.ncols() + q)] = out[(i, j)] * f[(p, q)];
                    }
                }
            }
        }
        out = k;
    }
    out
}

