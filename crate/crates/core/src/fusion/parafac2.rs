use crate::decomp::{als_update, cpd_als, FitOptions};
use crate::error::{Result, TensorError};
use crate::linalg::{chol_solve, svd};
use crate::tensor::{unfold_values, Tensor};
use crate::Matrix;

/// Slices `X_k` of shape `J_k x I`; `I` is shared, `J_k` may vary.
#[derive(Debug, Clone, PartialEq)]
pub struct Parafac2Data {
    slices: Vec<Matrix>,
}

impl Parafac2Data {
    pub fn new(slices: Vec<Matrix>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| TensorError::Dimension("PARAFAC2 needs at least one slice".into()))?;
        let cols = first.ncols();
        for (k, s) in slices.iter().enumerate() {
            if s.ncols() != cols {
                return Err(TensorError::Dimension(format!(
                    "slice {k} has {} columns, slice 0 has {cols}",
                    s.ncols()
                )));
            }
            if s.nrows() == 0 || s.ncols() == 0 {
                return Err(TensorError::Dimension(format!("slice {k} is empty")));
            }
        }
        Ok(Parafac2Data { slices })
    }

    pub fn slices(&self) -> &[Matrix] {
        &self.slices
    }

    /// Shared column count `I`.
    pub fn columns(&self) -> usize {
        self.slices[0].ncols()
    }
}

/// `X_k ≈ u[k] * diag(s.row(k)) * v^T`.
///
/// Columns of every `u[k]` and of `v` have unit norm; magnitudes live in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parafac2Result {
    pub u: Vec<Matrix>,
    pub s: Matrix,
    pub v: Matrix,
    pub iterations: usize,
    /// `sqrt(sum_k |X_k - X̂_k|² / sum_k |X_k|²)` after each sweep.
    pub error_trace: Vec<f64>,
    pub converged: bool,
}

impl Parafac2Result {
    pub fn rel_error(&self) -> f64 {
        self.error_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn reconstruct_slice(&self, k: usize) -> Matrix {
        let mut us = self.u[k].clone();
        for r in 0..us.ncols() {
            us.column_mut(r).scale_mut(self.s[(k, r)]);
        }
        us * self.v.transpose()
    }
}

/// Orthogonal Procrustes: the `J x R` matrix with orthonormal columns closest
/// to `m`, i.e. `U V^T` from the thin SVD of `m`.
fn procrustes(m: &Matrix) -> Result<Matrix> {
    let d = svd(m)?;
    Ok(d.u * d.vt)
}

/// `P_k` for every slice given the current `H`, `S`, `V`.
fn rotations(slices: &[Matrix], h: &Matrix, s: &Matrix, v: &Matrix) -> Result<Vec<Matrix>> {
    slices
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut vs = v.clone();
            for r in 0..vs.ncols() {
                vs.column_mut(r).scale_mut(s[(k, r)]);
            }
            procrustes(&(x * vs * h.transpose()))
        })
        .collect()
}

fn residual(slices: &[Matrix], p: &[Matrix], h: &Matrix, s: &Matrix, v: &Matrix) -> f64 {
    slices
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut hs = h.clone();
            for r in 0..hs.ncols() {
                hs.column_mut(r).scale_mut(s[(k, r)]);
            }
            (x - &p[k] * hs * v.transpose()).norm_squared()
        })
        .sum()
}

/// Moves column norms of `h` and `v` into `s`, which leaves the model unchanged.
fn rebalance(h: &mut Matrix, s: &mut Matrix, v: &mut Matrix) {
    for r in 0..h.ncols() {
        for f in [&mut *h, &mut *v] {
            let n = f.column(r).norm();
            if n > 0.0 {
                f.column_mut(r).unscale_mut(n);
                s.column_mut(r).scale_mut(n);
            }
        }
    }
}

/// PARAFAC2 by direct fitting.
///
/// Each sweep first solves an orthogonal Procrustes problem per slice for
/// `P_k` (so `U_k = P_k H` and `U_k^T U_k = H^T H` for all `k`), then runs one
/// CP-ALS sweep on the rotated slices `P_k^T X_k ≈ H diag(s_k) V^T`. The start
/// takes `V` and `S` from a CP-ALS fit of the stacked cross-products
/// `X_k^T X_k` with `H = I`.
///
/// The alternating scheme alone crawls when few slices are available, so on
/// problems with at most a few hundred free parameters every sweep also tries
/// up to three Levenberg-Marquardt steps on `(H, S, V)` with `P_k` eliminated.
/// A step is kept only if it lowers the residual, so the error trace stays
/// non-increasing.
pub fn parafac2(d: &Parafac2Data, rank: usize, opts: &FitOptions) -> Result<Parafac2Result> {
    opts.validate()?;
    let slices = &d.slices;
    let cols = d.columns();
    let min_rows = slices.iter().map(|s| s.nrows()).min().unwrap_or(0);
    if rank < 1 || rank > cols.min(min_rows) {
        return Err(TensorError::Argument(format!(
            "rank {rank} outside 1..={}",
            cols.min(min_rows)
        )));
    }
    let (h, s, v) = cross_product_start(slices, rank, opts)?;
    fit_from(slices, h, s, v, opts)
}

fn cross_product_start(slices: &[Matrix], rank: usize, opts: &FitOptions) -> Result<(Matrix, Matrix, Matrix)> {
    let cols = slices[0].ncols();
    let k_count = slices.len();
    // start: CP of the I x I x K cross-product tensor
    let mut cross = vec![0.0; cols * cols * k_count];
    for (k, x) in slices.iter().enumerate() {
        let c = x.transpose() * x;
        for i in 0..cols {
            for j in 0..cols {
                cross[(i * cols + j) * k_count + k] = c[(i, j)];
            }
        }
    }
    let cross = Tensor::new(vec![cols, cols, k_count], cross)?;
    let start = cpd_als(&cross, rank, opts)?;
    let start = start.form.as_cpd().expect("cpd_als returns a CPD");
    let v = start.factors()[0].clone();
    let s = Matrix::from_fn(k_count, rank, |k, r| {
        (start.weights()[r] * start.factors()[2][(k, r)]).abs().sqrt()
    });
    let h = Matrix::identity(rank, rank);

    Ok((h, s, v))
}

/// Problems with more free parameters than this skip the damped
/// Gauss-Newton step; its normal matrix is dense in the parameters.
const LM_MAX_PARAMS: usize = 600;
const LM_STEPS: usize = 3;

/// Free parameters `(H, S, V)`; every `P_k` is eliminated by Procrustes.
#[derive(Clone)]
struct Params {
    h: Matrix,
    s: Matrix,
    v: Matrix,
}

impl Params {
    fn len(&self) -> usize {
        self.h.len() + self.s.len() + self.v.len()
    }

    /// `H diag(s_k) V^T`, the slice model before rotation.
    fn inner(&self, k: usize) -> Matrix {
        let mut hs = self.h.clone();
        for r in 0..hs.ncols() {
            hs.column_mut(r).scale_mut(self.s[(k, r)]);
        }
        hs * self.v.transpose()
    }

    /// Parameter vector layout: `H` row-major, then `S` row-major, then `V`
    /// row-major.
    fn shifted(&self, step: &[f64]) -> Params {
        let rank = self.h.ncols();
        let (nh, ns) = (self.h.len(), self.s.len());
        let mut out = self.clone();
        for a in 0..rank {
            for b in 0..rank {
                out.h[(a, b)] += step[a * rank + b];
            }
        }
        for k in 0..self.s.nrows() {
            for r in 0..rank {
                out.s[(k, r)] += step[nh + k * rank + r];
            }
        }
        for i in 0..self.v.nrows() {
            for r in 0..rank {
                out.v[(i, r)] += step[nh + ns + i * rank + r];
            }
        }
        out
    }
}

/// Squared residual with every `P_k` at its Procrustes optimum.
fn projected_residual(slices: &[Matrix], p: &Params) -> Result<f64> {
    let mut total = 0.0;
    for (k, x) in slices.iter().enumerate() {
        let b = p.inner(k);
        let rot = procrustes(&(x * b.transpose()))?;
        total += (x - rot * b).norm_squared();
    }
    Ok(total)
}

/// Gauss-Newton normal equations `J^T J` and `J^T r` of the residual
/// `X_k - P_k(θ) B_k(θ)`, with the derivative of the polar factor
/// `P_k = polar(X_k B_k^T)` included.
fn normal_equations(slices: &[Matrix], p: &Params) -> Result<(Matrix, Vec<f64>)> {
    let rank = p.h.ncols();
    let cols = p.v.nrows();
    let (nh, ns) = (p.h.len(), p.s.len());
    let n = p.len();
    let mut jtj = Matrix::zeros(n, n);
    let mut jtr = vec![0.0; n];
    for (k, x) in slices.iter().enumerate() {
        let b = p.inner(k);
        let m = x * b.transpose();
        let dec = svd(&m)?;
        let w = dec.vt.transpose();
        let rot = &dec.u * &dec.vt;
        let resid = x - &rot * &b;
        let floor = dec.s.first().copied().unwrap_or(0.0) * 1e-12;
        let inv_sym = {
            let mut wi = w.clone();
            for (j, sj) in dec.s.iter().enumerate() {
                let f = if *sj > floor { 1.0 / sj } else { 0.0 };
                wi.column_mut(j).scale_mut(f);
            }
            wi * w.transpose()
        };

        // (global index, dB) for every parameter that touches slice k
        let mut dirs: Vec<(usize, Matrix)> = Vec::with_capacity(nh + rank + cols * rank);
        for a in 0..rank {
            for c in 0..rank {
                let mut db = Matrix::zeros(rank, cols);
                let row = p.v.column(c).transpose() * p.s[(k, c)];
                db.row_mut(a).copy_from(&row);
                dirs.push((a * rank + c, db));
            }
        }
        for r in 0..rank {
            let db = p.h.column(r) * p.v.column(r).transpose();
            dirs.push((nh + k * rank + r, db));
        }
        for i in 0..cols {
            for r in 0..rank {
                let mut db = Matrix::zeros(rank, cols);
                db.column_mut(i).copy_from(&(p.h.column(r) * p.s[(k, r)]));
                dirs.push((nh + ns + i * rank + r, db));
            }
        }

        let cols_j: Vec<(usize, Matrix)> = dirs
            .into_iter()
            .map(|(idx, db)| {
                let dm = x * db.transpose();
                let ptdm = rot.transpose() * &dm;
                let skew = &ptdm - ptdm.transpose();
                let mut om = w.transpose() * skew * &w;
                for i in 0..rank {
                    for j in 0..rank {
                        let den = dec.s[i] + dec.s[j];
                        om[(i, j)] = if den > floor { om[(i, j)] / den } else { 0.0 };
                    }
                }
                let omega = &w * om * w.transpose();
                let dp = &rot * omega + (&dm - &rot * ptdm) * &inv_sym;
                let dr = -(dp * &b + &rot * db);
                (idx, dr)
            })
            .collect();
        for (ia, (ga, da)) in cols_j.iter().enumerate() {
            jtr[*ga] += da.dot(&resid);
            for (gb, db) in &cols_j[ia..] {
                let v = da.dot(db);
                jtj[(*ga, *gb)] += v;
                if ga != gb {
                    jtj[(*gb, *ga)] += v;
                }
            }
        }
    }
    Ok((jtj, jtr))
}

/// Levenberg-Marquardt state carried across sweeps.
struct Damping {
    mu: Option<f64>,
}

impl Damping {
    const TRIES: usize = 6;

    /// One damped Gauss-Newton step from `p`; returns the improved parameters
    /// and their squared residual, or `None` when no trial lowered `current`.
    fn step(&mut self, slices: &[Matrix], p: &Params, current: f64) -> Result<Option<(Params, f64)>> {
        let (jtj, jtr) = normal_equations(slices, p)?;
        let scale = jtj.diagonal().max();
        if !(scale > 0.0) || !scale.is_finite() {
            return Ok(None);
        }
        let mut mu = self.mu.unwrap_or(1e-3 * scale);
        let rhs = Matrix::from_column_slice(jtr.len(), 1, &jtr);
        for _ in 0..Self::TRIES {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu;
            }
            let step = match chol_solve(&a, &rhs) {
                Ok(st) => st,
                Err(_) => {
                    mu *= 4.0;
                    continue;
                }
            };
            let step: Vec<f64> = step.iter().map(|x| -x).collect();
            let trial = p.shifted(&step);
            let err = projected_residual(slices, &trial)?;
            if err.is_finite() && err < current {
                self.mu = Some((mu / 3.0).max(1e-15 * scale));
                return Ok(Some((trial, err)));
            }
            mu *= 4.0;
        }
        self.mu = Some(mu);
        Ok(None)
    }
}

fn fit_from(slices: &[Matrix], h: Matrix, s: Matrix, v: Matrix, opts: &FitOptions) -> Result<Parafac2Result> {
    let cols = slices[0].ncols();
    let k_count = slices.len();
    let rank = h.ncols();
    let total: f64 = slices.iter().map(|s| s.norm_squared()).sum();
    let denom = if total > 0.0 { total } else { 1.0 };
    let mut params = Params { h, s, v };
    let accelerate = params.len() <= LM_MAX_PARAMS;
    let mut damping = Damping { mu: None };

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for it in 0..opts.max_iter {
        let p = rotations(slices, &params.h, &params.s, &params.v)?;
        // rotated slices as an R x I x K tensor
        let mut y = vec![0.0; rank * cols * k_count];
        for (k, (x, pk)) in slices.iter().zip(&p).enumerate() {
            let yk = pk.transpose() * x;
            for a in 0..rank {
                for i in 0..cols {
                    y[(a * cols + i) * k_count + k] = yk[(a, i)];
                }
            }
        }
        let shape = [rank, cols, k_count];
        let Params { h, s, v } = params;
        let mut factors = vec![h, v, s];
        for n in 0..3 {
            let unf = unfold_values(&shape, &y, n);
            factors[n] = als_update(&unf, &factors, n)?;
        }
        let s = factors.pop().expect("three factors");
        let v = factors.pop().expect("three factors");
        let h = factors.pop().expect("three factors");
        params = Params { h, s, v };

        let mut sq = residual(slices, &p, &params.h, &params.s, &params.v);
        if accelerate && sq.is_finite() {
            // re-rotating can only lower the residual
            sq = sq.min(projected_residual(slices, &params)?);
            for _ in 0..LM_STEPS {
                match damping.step(slices, &params, sq)? {
                    Some((next, next_sq)) => {
                        params = next;
                        sq = next_sq;
                    }
                    None => break,
                }
            }
        }
        rebalance(&mut params.h, &mut params.s, &mut params.v);

        let err = (sq / denom).sqrt();
        if !err.is_finite() {
            return Err(TensorError::Numeric(format!(
                "PARAFAC2 diverged at iteration {}",
                it + 1
            )));
        }
        if opts.verbose {
            log::info!("parafac2 iteration {}: rel_error {err:e}", it + 1);
        }
        let prev = trace.last().copied();
        trace.push(err);
        if prev.is_some_and(|q| (q - err).abs() < opts.tol) {
            converged = true;
            break;
        }
    }

    let Params { h, s, v } = params;
    let p = rotations(slices, &h, &s, &v)?;
    let u = p.iter().map(|pk| pk * &h).collect();
    Ok(Parafac2Result {
        u,
        s,
        v,
        iterations: trace.len(),
        error_trace: trace,
        converged,
    })
}
