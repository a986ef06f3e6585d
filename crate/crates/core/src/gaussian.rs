//! Tensor-valued Gaussian models with Kronecker-separable covariance.
//!
//! Samples are vectorised row-major, the same order as
//! [`Tensor::vectorise`](crate::Tensor::vectorise). Under that order the
//! covariance of `vec(X)` is `Σ_1 ⊗ Σ_2 ⊗ … ⊗ Σ_N`: mode 0 is the slowest
//! index, so its factor sits leftmost.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decomp::{seeded_rng, FitOptions};
use crate::error::{Result, TensorError};
use crate::linalg::{cholesky, logdet_from_cholesky, solve_lower};
use crate::tensor::{mode_product_values, unfold_values, Tensor};
use crate::Matrix;

const SYMMETRY_TOL: f64 = 1e-12;

/// Mean tensor plus one covariance factor per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorNormal {
    mean: Tensor,
    factors: Vec<Matrix>,
}

impl TensorNormal {
    pub fn new(mean: Tensor, factors: Vec<Matrix>) -> Result<Self> {
        let shape = mean.shape();
        if factors.len() != shape.len() {
            return Err(TensorError::Dimension(format!(
                "{} covariance factors for an order-{} mean",
                factors.len(),
                shape.len()
            )));
        }
        for (n, (f, &dim)) in factors.iter().zip(shape).enumerate() {
            if f.nrows() != dim || f.ncols() != dim {
                return Err(TensorError::Dimension(format!(
                    "factor {n} is {}x{}, mode {n} has size {dim}",
                    f.nrows(),
                    f.ncols()
                )));
            }
            let asym = (f - f.transpose()).amax();
            if asym > SYMMETRY_TOL * f.amax().max(1.0) {
                return Err(TensorError::Numeric(format!(
                    "factor {n} is not symmetric (max asymmetry {asym:e})"
                )));
            }
            cholesky(f).map_err(|e| e.context(format!("factor {n}")))?;
        }
        Ok(TensorNormal {
            mean: mean.into_raw(),
            factors,
        })
    }

    /// Zero mean and identity factors.
    pub fn standard(shape: &[usize]) -> Result<Self> {
        let mean = Tensor::zeros(shape.to_vec())?;
        let factors = shape.iter().map(|&d| Matrix::identity(d, d)).collect();
        TensorNormal::new(mean, factors)
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn shape(&self) -> &[usize] {
        self.mean.shape()
    }

    fn cholesky_factors(&self) -> Result<Vec<Matrix>> {
        self.factors.iter().map(cholesky).collect()
    }

    fn check_shape(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.shape() {
            return Err(TensorError::Dimension(format!(
                "sample shape {:?} does not match model shape {:?}",
                x.shape(),
                self.shape()
            )));
        }
        Ok(())
    }
}

/// `values ×_n inv(l_n)` over the listed modes, with `l_n` lower triangular.
fn whiten(shape: &[usize], values: &[f64], chol: &[Matrix], modes: impl Iterator<Item = usize>) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    for n in modes {
        let dim = shape[n];
        let inv = solve_lower(&chol[n], &Matrix::identity(dim, dim))?;
        out = mode_product_values(shape, &out, &inv, n)?.1;
    }
    Ok(out)
}

fn log_density(shape: &[usize], centred: &[f64], chol: &[Matrix]) -> Result<f64> {
    let size = centred.len() as f64;
    let logdet: f64 = chol
        .iter()
        .zip(shape)
        .map(|(l, &d)| size / d as f64 * logdet_from_cholesky(l))
        .sum();
    let w = whiten(shape, centred, chol, 0..shape.len())?;
    let maha: f64 = w.iter().map(|v| v * v).sum();
    Ok(-0.5 * (size * (2.0 * std::f64::consts::PI).ln() + logdet + maha))
}

/// Log density of `vec(x)` without forming the full covariance.
pub fn logpdf(m: &TensorNormal, x: &Tensor) -> Result<f64> {
    m.check_shape(x)?;
    let chol = m.cholesky_factors()?;
    let centred: Vec<f64> = x.values().iter().zip(m.mean.values()).map(|(a, b)| a - b).collect();
    log_density(m.shape(), &centred, &chol)
}

/// `count` draws `M + Z ×_1 L_1 … ×_N L_N` with `Z` standard normal.
pub fn sample(m: &TensorNormal, count: usize, seed: u64) -> Result<Vec<Tensor>> {
    if count == 0 {
        return Err(TensorError::Argument("sample count must be >= 1".into()));
    }
    let chol = m.cholesky_factors()?;
    let shape = m.shape().to_vec();
    let size = m.mean.size();
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let mut z: Vec<f64> = (0..size).map(|_| StandardNormal.sample(&mut rng)).collect();
            for (n, l) in chol.iter().enumerate() {
                z = mode_product_values(&shape, &z, l, n)?.1;
            }
            for (v, mu) in z.iter_mut().zip(m.mean.values()) {
                *v += mu;
            }
            Tensor::from_parts(shape.clone(), z, m.mean.modes().to_vec(), Vec::new())
        })
        .collect()
}

/// Options for [`fit_flip_flop`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlipFlopOptions {
    pub fit: FitOptions,
    /// Added to the diagonal of every factor update; 0 disables it.
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipFlopResult {
    pub model: TensorNormal,
    /// Total log-likelihood of the samples at the start and after each sweep.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn total_loglik(shape: &[usize], centred: &[Vec<f64>], factors: &[Matrix]) -> Result<f64> {
    let chol = factors.iter().map(cholesky).collect::<Result<Vec<_>>>()?;
    centred.iter().map(|d| log_density(shape, d, &chol)).sum()
}

/// Scales every factor but the last to `trace / I_n = 1`; the product is
/// unchanged.
fn normalise_scale(factors: &mut [Matrix]) {
    let last = factors.len() - 1;
    let mut carry = 1.0;
    for f in factors[..last].iter_mut() {
        let avg = f.trace() / f.nrows() as f64;
        if avg > 0.0 {
            *f /= avg;
            carry *= avg;
        }
    }
    factors[last] *= carry;
}

/// Maximum-likelihood mean and covariance factors by the flip-flop algorithm.
///
/// The mean is the sample average. Starting from identity factors, each sweep
/// updates `Σ_n = I_n / (K P) Σ_k E_k(n) E_k(n)^T`, where `E_k` is the
/// centred sample `k` whitened by the current factors of every other mode.
/// Each update maximises the likelihood over `Σ_n` exactly, so the trace is
/// non-decreasing when `ridge` is 0. After every sweep all factors but the
/// last are rescaled to unit average trace. Sweeps stop once the largest
/// relative Frobenius change of any factor drops below `opts.fit.tol`.
pub fn fit_flip_flop(samples: &[Tensor], opts: &FlipFlopOptions) -> Result<FlipFlopResult> {
    opts.fit.validate()?;
    if !(opts.ridge >= 0.0) || !opts.ridge.is_finite() {
        return Err(TensorError::Argument(format!("ridge must be >= 0, got {}", opts.ridge)));
    }
    if samples.len() < 2 {
        return Err(TensorError::Data(format!(
            "fitting needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let shape = samples[0].shape().to_vec();
    for (i, s) in samples.iter().enumerate() {
        if s.shape() != shape.as_slice() {
            return Err(TensorError::Dimension(format!(
                "sample {i} has shape {:?}, sample 0 has {shape:?}",
                s.shape()
            )));
        }
    }
    let count = samples.len();
    let size: usize = shape.iter().product();
    for (n, &dim) in shape.iter().enumerate() {
        let cols = (count * size / dim) as f64;
        if cols <= dim as f64 {
            log::warn!(
                "mode {n}: {cols} whitened columns for a {dim}x{dim} factor; the estimate may be singular (consider a ridge)"
            );
        }
    }

    let mut mean = vec![0.0; size];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let centred: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.values().iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();

    let mut factors: Vec<Matrix> = shape.iter().map(|&d| Matrix::identity(d, d)).collect();
    let mut trace = vec![total_loglik(&shape, &centred, &factors)?];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.fit.max_iter {
        sweeps += 1;
        let previous = factors.clone();
        for n in 0..shape.len() {
            let chol = factors.iter().map(cholesky).collect::<Result<Vec<_>>>()?;
            let dim = shape[n];
            let mut acc = Matrix::zeros(dim, dim);
            for d in &centred {
                let w = whiten(&shape, d, &chol, (0..shape.len()).filter(|&m| m != n))?;
                let unf = unfold_values(&shape, &w, n);
                acc += &unf * unf.transpose();
            }
            acc *= dim as f64 / (count * size) as f64;
            acc = (&acc + acc.transpose()) * 0.5;
            for i in 0..dim {
                acc[(i, i)] += opts.ridge;
            }
            cholesky(&acc).map_err(|e| {
                TensorError::Numeric(format!(
                    "flip-flop update of mode {n} is singular ({e}); try a positive ridge"
                ))
            })?;
            factors[n] = acc;
        }
        normalise_scale(&mut factors);
        let ll = total_loglik(&shape, &centred, &factors)?;
        if !ll.is_finite() {
            return Err(TensorError::Numeric(format!("log-likelihood is not finite after sweep {sweeps}")));
        }
        if opts.fit.verbose {
            log::info!("flip-flop sweep {sweeps}: log-likelihood {ll}");
        }
        trace.push(ll);
        let change = factors
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max);
        if change < opts.fit.tol {
            converged = true;
            break;
        }
    }

    let mean = Tensor::from_parts(shape.clone(), mean, samples[0].modes().to_vec(), Vec::new())?;
    Ok(FlipFlopResult {
        model: TensorNormal::new(mean, factors)?,
        loglik_trace: trace,
        iterations: sweeps,
        converged,
    })
}

/// [`fit_flip_flop`] without a ridge, returning only the model.
pub fn fit(samples: &[Tensor], opts: &FitOptions) -> Result<TensorNormal> {
    let opts = FlipFlopOptions {
        fit: *opts,
        ridge: 0.0,
    };
    Ok(fit_flip_flop(samples, &opts)?.model)
}

/// Free-parameter counts of the separable and the unstructured model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofCount {
    pub eta_tensor: u64,
    pub eta_multi: u64,
    pub ratio: f64,
}

/// Mean plus one symmetric factor per mode, against mean plus one full
/// symmetric covariance of `vec(X)`.
pub fn dof_ratio(shape: &[usize]) -> Result<DofCount> {
    if shape.is_empty() {
        return Err(TensorError::Argument("shape must have at least one mode".into()));
    }
    if shape.contains(&0) {
        return Err(TensorError::Argument(format!("shape {shape:?} has a zero dimension")));
    }
    let overflow = || TensorError::Argument(format!("parameter count for shape {shape:?} overflows"));
    let sym = |d: u64| d.checked_mul(d + 1).map(|v| v / 2);
    let mut size: u64 = 1;
    let mut factor_params: u64 = 0;
    for &d in shape {
        let d = d as u64;
        size = size.checked_mul(d).ok_or_else(overflow)?;
        factor_params = factor_params.checked_add(sym(d).ok_or_else(overflow)?).ok_or_else(overflow)?;
    }
    let eta_tensor = size.checked_add(factor_params).ok_or_else(overflow)?;
    let eta_multi = size.checked_add(sym(size).ok_or_else(overflow)?).ok_or_else(overflow)?;
    Ok(DofCount {
        eta_tensor,
        eta_multi,
        ratio: eta_tensor as f64 / eta_multi as f64,
    })
}

/// Bayes rule over class-conditional tensor-normal densities.
///
/// Picks the label maximising `logpdf + ln(prior)`; exact ties go to the
/// lexicographically smallest label.
pub fn classify_conditional(models: &[(String, TensorNormal)], priors: &[f64], x: &Tensor) -> Result<String> {
    if models.len() < 2 {
        return Err(TensorError::Argument(format!(
            "need at least 2 class models, got {}",
            models.len()
        )));
    }
    if priors.len() != models.len() {
        return Err(TensorError::Argument(format!(
            "{} priors for {} models",
            priors.len(),
            models.len()
        )));
    }
    if priors.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(TensorError::Argument("priors must be finite and non-negative".into()));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(TensorError::Argument(format!("priors sum to {total}, expected 1")));
    }
    let mut best: Option<(&str, f64)> = None;
    for ((label, model), prior) in models.iter().zip(priors) {
        let score = logpdf(model, x)? + prior.ln();
        best = match best {
            None => Some((label, score)),
            Some((bl, bs)) if score > bs || (score == bs && label.as_str() < bl) => Some((label, score)),
            keep => keep,
        };
    }
    let (label, score) = best.expect("at least two models");
    if score == f64::NEG_INFINITY {
        // every class has zero prior mass or density; fall back to the tie rule
        return Ok(models.iter().map(|(l, _)| l.as_str()).min().expect("non-empty").to_string());
    }
    Ok(label.to_string())
}
