use crate::decomp::{als_update, initial_factors, seeded_rng, FitOptions};
use crate::error::{Result, TensorError};
use crate::forms::{EfficientForm, TensorCPD};
use crate::linalg::pinv;
use crate::ops::{norm, sq_dist};
use crate::tensor::Tensor;
use crate::Matrix;

const RCOND: f64 = 1e-12;

/// An order-3 tensor and a matrix sharing the tensor's mode 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledData {
    tensor: Tensor,
    side_matrix: Matrix,
}

impl CoupledData {
    pub fn new(tensor: Tensor, side_matrix: Matrix) -> Result<Self> {
        if tensor.order() != 3 {
            return Err(TensorError::Dimension(format!(
                "coupled tensor must be of order 3, got {}",
                tensor.order()
            )));
        }
        if side_matrix.nrows() != tensor.shape()[0] {
            return Err(TensorError::Dimension(format!(
                "side matrix has {} rows, the coupled mode has {}",
                side_matrix.nrows(),
                tensor.shape()[0]
            )));
        }
        Ok(CoupledData {
            tensor,
            side_matrix,
        })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn side_matrix(&self) -> &Matrix {
        &self.side_matrix
    }

    /// Always 0 in this version.
    pub fn coupled_mode(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmtfResult {
    /// Normalised CPD of the tensor.
    pub cpd: TensorCPD,
    /// Side-matrix loadings, `side ≈ A * diag(1) * v^T` with `A` the
    /// normalised mode-0 factor of `cpd`.
    pub v: Matrix,
    pub iterations: usize,
    /// Combined relative error after each sweep:
    /// `sqrt(|X - X̂|² + |Y - Ŷ|²) / sqrt(|X|² + |Y|²)`.
    pub error_trace: Vec<f64>,
    pub converged: bool,
}

impl CmtfResult {
    pub fn rel_error(&self) -> f64 {
        self.error_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// `Y^T A pinv(A^T A)`, the least-squares side loadings for a fixed `A`.
fn side_loadings(y: &Matrix, a: &Matrix) -> Result<Matrix> {
    Ok(y.transpose() * a * pinv(&(a.transpose() * a), RCOND)?)
}

fn combined_error(x: &Tensor, y: &Matrix, factors: &[Matrix], v: &Matrix) -> Result<f64> {
    let rank = factors[0].ncols();
    let cpd = TensorCPD::new(vec![1.0; rank], factors.to_vec(), None)?;
    let rec = cpd.reconstruct()?;
    let yhat = &factors[0] * v.transpose();
    let num = sq_dist(x.values(), rec.values()) + (y - yhat).norm_squared();
    let den = norm(x.values()).powi(2) + y.norm_squared();
    Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
}

/// Coupled matrix-tensor factorisation by alternating least squares.
///
/// Minimises `|X - [[A, B, C]]|² + |Y - A V^T|²` with both residuals weighted
/// equally. Each sweep updates `A` from the stacked system of both terms,
/// then `B`, `C` and `V` by ordinary least squares. The start is the same as
/// [`crate::decomp::cpd_als`]'s, so with an empty side matrix the iterates
/// coincide with plain CP-ALS.
pub fn cmtf(d: &CoupledData, rank: usize, opts: &FitOptions) -> Result<CmtfResult> {
    opts.validate()?;
    if rank < 1 {
        return Err(TensorError::Argument("rank must be >= 1".into()));
    }
    let x = &d.tensor;
    let y = &d.side_matrix;
    let unfoldings = (0..3)
        .map(|n| x.unfold_matrix(n))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded_rng(opts.seed);
    let mut factors = initial_factors(x, &unfoldings, rank, &mut rng)?;
    let mut v = side_loadings(y, &factors[0])?;

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for it in 0..opts.max_iter {
        // A: [X_(0), Y] against [KR; V]
        let b = &factors[1];
        let c = &factors[2];
        let kr = crate::ops::khatri_rao(c, b)?;
        let gram = (c.transpose() * c).component_mul(&(b.transpose() * b)) + v.transpose() * &v;
        let rhs = &unfoldings[0] * kr + y * &v;
        factors[0] = rhs * pinv(&gram, RCOND)?;
        factors[1] = als_update(&unfoldings[1], &factors, 1)?;
        factors[2] = als_update(&unfoldings[2], &factors, 2)?;
        v = side_loadings(y, &factors[0])?;

        let err = combined_error(x, y, &factors, &v)?;
        if !err.is_finite() {
            return Err(TensorError::Numeric(format!(
                "CMTF diverged at iteration {}",
                it + 1
            )));
        }
        if opts.verbose {
            log::info!("cmtf iteration {}: rel_error {err:e}", it + 1);
        }
        let prev = trace.last().copied();
        trace.push(err);
        if prev.is_some_and(|p| (p - err).abs() < opts.tol) {
            converged = true;
            break;
        }
    }

    let raw_a = factors[0].clone();
    let cpd = TensorCPD::new(vec![1.0; rank], factors, Some(x.modes().to_vec()))?.normalised();
    // move the scale (and sign) taken out of A into V
    let a_norm = &cpd.factors()[0];
    for r in 0..rank {
        let scale = raw_a.column(r).dot(&a_norm.column(r));
        v.column_mut(r).scale_mut(scale);
    }
    Ok(CmtfResult {
        cpd,
        v,
        iterations: trace.len(),
        error_trace: trace,
        converged,
    })
}
