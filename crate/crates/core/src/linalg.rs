//! Dense linear algebra kernel: SVD, Cholesky solves, pseudo-inverse, QR.
//!
//! Factorisations delegate to `nalgebra`; this module pins down ordering and
//! sign conventions so results are deterministic.

use crate::error::{Result, TensorError};
use crate::Matrix;

/// Thin SVD `m = u * diag(s) * vt`.
///
/// `s` is non-increasing; among equal values the original order is kept.
/// The largest-magnitude entry of each column of `u` is non-negative.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (k, &s) in self.s.iter().enumerate() {
            us.column_mut(k).scale_mut(s);
        }
        us * &self.vt
    }

    /// Leading `k` triplets.
    pub fn truncate(mut self, k: usize) -> SvdResult {
        let k = k.min(self.s.len());
        self.s.truncate(k);
        SvdResult {
            u: self.u.columns(0, k).into_owned(),
            s: self.s,
            vt: self.vt.rows(0, k).into_owned(),
        }
    }
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::Numeric(format!("{what}: input contains non-finite values")))
    }
}

/// Thin SVD through `faer`, whose bidiagonal solver stays accurate on
/// rank-deficient input.
fn faer_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let a = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let dec = a
        .thin_svd()
        .map_err(|e| TensorError::Numeric(format!("svd failed to converge: {e:?}")))?;
    let (u, v) = (dec.U(), dec.V());
    let s = dec.S().column_vector();
    let k = s.nrows();
    let u = Matrix::from_fn(m.nrows(), k, |i, j| u[(i, j)]);
    let vt = Matrix::from_fn(k, m.ncols(), |i, j| v[(j, i)]);
    Ok((u, (0..k).map(|i| s[i]).collect(), vt))
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.is_empty() {
        return Err(TensorError::Dimension("svd of an empty matrix".into()));
    }
    check_finite(m, "svd")?;
    let (u, s, vt) = faer_svd(m)?;
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    // stable: ties keep their original column order
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).expect("finite singular values"));

    let mut out_u = Matrix::zeros(u.nrows(), k);
    let mut out_vt = Matrix::zeros(k, vt.ncols());
    let mut out_s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let mut pivot = 0.0f64;
        for &v in col.iter() {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        out_u.set_column(dst, &(col * sign));
        out_vt.set_row(dst, &(vt.row(src) * sign));
        out_s.push(s[src].max(0.0));
    }
    Ok(SvdResult {
        u: out_u,
        s: out_s,
        vt: out_vt,
    })
}

pub fn svd_truncated(m: &Matrix, k: usize) -> Result<SvdResult> {
    let max = m.nrows().min(m.ncols());
    if k < 1 || k > max {
        return Err(TensorError::Argument(format!(
            "truncation rank {k} outside 1..={max}"
        )));
    }
    Ok(svd(m)?.truncate(k))
}

/// First `k` left singular vectors (`k` may not exceed `min(rows, cols)`).
pub(crate) fn leading_left_vectors(m: &Matrix, k: usize) -> Result<Matrix> {
    Ok(svd_truncated(m, k)?.u)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(TensorError::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, "cholesky")?;
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(TensorError::Numeric(format!(
                "matrix is not positive definite: pivot {j} is {d:e}"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Ok(l)
}

/// Solves `l * x = b` for lower-triangular `l`.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    l.solve_lower_triangular(b)
        .ok_or_else(|| TensorError::Numeric("singular triangular system".into()))
}

/// Solves `a * x = b` for symmetric positive-definite `a`.
pub fn chol_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(TensorError::Dimension(format!(
            "chol_solve: {}x{} system with {} right-hand-side rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let l = cholesky(a)?;
    let y = solve_lower(&l, b)?;
    l.transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| TensorError::Numeric("singular triangular system".into()))
}

/// `log det(a)` from its lower Cholesky factor.
pub fn logdet_from_cholesky(l: &Matrix) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Moore-Penrose pseudo-inverse; singular values below `rcond * max(s)`
/// are treated as zero.
pub fn pinv(m: &Matrix, rcond: f64) -> Result<Matrix> {
    let dec = svd(m)?;
    let cutoff = rcond * dec.s.first().copied().unwrap_or(0.0);
    let mut v = dec.vt.transpose();
    for (k, &s) in dec.s.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        v.column_mut(k).scale_mut(inv);
    }
    Ok(v * dec.u.transpose())
}

/// Thin QR with a non-negative diagonal in `r`.
pub fn qr(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if m.is_empty() {
        return Err(TensorError::Dimension("qr of an empty matrix".into()));
    }
    check_finite(m, "qr")?;
    let dec = m.clone().qr();
    let mut q = dec.q();
    let mut r = dec.r();
    for k in 0..r.nrows() {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
            r.row_mut(k).neg_mut();
        }
    }
    Ok((q, r))
}
