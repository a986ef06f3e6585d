//! Matrix products and norms shared by the decompositions.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;
use crate::Matrix;

/// Column-wise Kronecker product; row index is `i * J + j` (`a` slowest).
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(TensorError::Dimension(format!(
            "khatri-rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ia, jb) = (a.nrows(), b.nrows());
    let mut out = Matrix::zeros(ia * jb, a.ncols());
    for r in 0..a.ncols() {
        for i in 0..ia {
            let x = a[(i, r)];
            for j in 0..jb {
                out[(i * jb + j, r)] = x * b[(j, r)];
            }
        }
    }
    Ok(out)
}

/// Khatri-Rao product of a list, left to right (first matrix slowest).
pub fn khatri_rao_list(mats: &[&Matrix]) -> Result<Matrix> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| TensorError::Dimension("khatri-rao of an empty list".into()))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, m| khatri_rao(&acc, m))
}

pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(TensorError::Dimension(format!(
            "hadamard needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

pub fn frobenius_norm(t: &Tensor) -> f64 {
    norm(t.values())
}

pub fn inner(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(TensorError::Dimension(format!(
            "inner product needs identical shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(dot(a.values(), b.values()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm; rescales when the plain sum of squares under- or
/// overflows, so only an all-zero input has norm 0.
pub(crate) fn norm(v: &[f64]) -> f64 {
    let sq = dot(v, v);
    if sq.is_normal() && sq.is_finite() {
        return sq.sqrt();
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return if scale == 0.0 { 0.0 } else { sq.sqrt() };
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

/// Squared Frobenius distance between two equally sized slices.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Flattens a matrix in row-major order.
pub fn to_row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
