use serde::{Deserialize, Serialize};

use super::{label_of, ls_svm_dual, TensorDataset};
use crate::decomp::FitOptions;
use crate::error::{Result, TensorError};
use crate::ops::{dot, norm};
use crate::tensor::Tensor;
use crate::Matrix;

/// Rank-one support tensor machine: decision `<X, w_1 ∘ … ∘ w_N> + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsstmModel {
    pub mode_vectors: Vec<Vec<f64>>,
    pub bias: f64,
    pub c: f64,
    /// `½ Π|w_n|² + (C/2) Σ e_i²` after each sweep.
    #[serde(default)]
    pub objective_trace: Vec<f64>,
    #[serde(default)]
    pub converged: bool,
}

impl LsstmModel {
    pub fn shape(&self) -> Vec<usize> {
        self.mode_vectors.iter().map(Vec::len).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode_vectors.is_empty() || self.mode_vectors.iter().any(Vec::is_empty) {
            return Err(TensorError::validation("mode_vectors", "every mode needs a non-empty vector"));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(TensorError::validation("c", format!("must be > 0, got {}", self.c)));
        }
        if !self.bias.is_finite() || self.mode_vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TensorError::validation("mode_vectors", "values must be finite"));
        }
        Ok(())
    }
}

/// `X` contracted with `ws[m]` along every mode `m` except `skip`.
/// With `skip = None` the result has a single entry, `<X, ∘ ws>`.
fn contract(shape: &[usize], values: &[f64], ws: &[Vec<f64>], skip: Option<usize>) -> Vec<f64> {
    let mut out = vec![0.0; skip.map_or(1, |n| shape[n])];
    let mut idx = vec![0usize; shape.len()];
    for &x in values {
        let mut w = x;
        for (m, &i) in idx.iter().enumerate() {
            if Some(m) != skip {
                w *= ws[m][i];
            }
        }
        out[skip.map_or(0, |n| idx[n])] += w;
        // row-major: last index fastest
        for m in (0..shape.len()).rev() {
            idx[m] += 1;
            if idx[m] < shape[m] {
                break;
            }
            idx[m] = 0;
        }
    }
    out
}

fn objective(ws: &[Vec<f64>], bias: f64, c: f64, d: &TensorDataset) -> f64 {
    let reg: f64 = ws.iter().map(|w| dot(w, w)).product();
    let loss: f64 = d
        .samples()
        .iter()
        .zip(d.labels())
        .map(|(x, &y)| {
            let f = contract(x.shape(), x.values(), ws, None)[0] + bias;
            (f64::from(y) - f).powi(2)
        })
        .sum();
    0.5 * reg + 0.5 * c * loss
}

/// Least-squares support tensor machine by alternating over modes.
///
/// With all vectors but `w_n` fixed, every sample contracts to a vector
/// `x̃_i` and the problem becomes a linear LS-SVM in `w_n` whose regulariser
/// is scaled by `η = Π_{m≠n} |w_m|²`. Its dual
/// `[0 1^T; 1 K̃ + (η/C) I] [b; β] = [0; y]` gives `w_n = Σ β_i x̃_i`. Mode
/// vectors start as normalised all-ones vectors; sweeps stop when every mode
/// vector's relative change drops below `opts.tol`.
pub fn lsstm_train(d: &TensorDataset, c: f64, opts: &FitOptions) -> Result<LsstmModel> {
    opts.validate()?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(TensorError::Argument(format!("C must be > 0, got {c}")));
    }
    d.require_both_classes()?;
    let shape = d.sample_shape().to_vec();
    let order = shape.len();
    let y: Vec<f64> = d.labels().iter().map(|&l| f64::from(l)).collect();
    let mut ws: Vec<Vec<f64>> = shape
        .iter()
        .map(|&n| vec![1.0 / (n as f64).sqrt(); n])
        .collect();
    let mut bias = 0.0;
    let mut trace = Vec::new();
    let mut converged = false;

    for sweep in 0..opts.max_iter {
        let mut change = 0.0f64;
        for n in 0..order {
            let eta: f64 = (0..order).filter(|&m| m != n).map(|m| dot(&ws[m], &ws[m])).product();
            let reduced: Vec<Vec<f64>> = d
                .samples()
                .iter()
                .map(|x| contract(&shape, x.values(), &ws, Some(n)))
                .collect();
            let k = reduced.len();
            let gram = Matrix::from_fn(k, k, |i, j| dot(&reduced[i], &reduced[j]));
            let (b, beta) = ls_svm_dual(&gram, &y, eta / c)?;
            let mut w = vec![0.0; shape[n]];
            for (bi, xi) in beta.iter().zip(&reduced) {
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += bi * xj;
                }
            }
            let old = norm(&ws[n]);
            let diff: f64 = w.iter().zip(&ws[n]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            change = change.max(if old > 0.0 { diff / old } else { diff });
            ws[n] = w;
            bias = b;
        }
        let obj = objective(&ws, bias, c, d);
        if !obj.is_finite() {
            return Err(TensorError::Numeric(format!("LSSTM diverged in sweep {}", sweep + 1)));
        }
        if opts.verbose {
            log::info!("lsstm sweep {}: objective {obj:e}, change {change:e}", sweep + 1);
        }
        trace.push(obj);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(LsstmModel {
        mode_vectors: ws,
        bias,
        c,
        objective_trace: trace,
        converged,
    })
}

pub fn lsstm_decision(m: &LsstmModel, x: &Tensor) -> Result<f64> {
    let shape = m.shape();
    if x.shape() != shape.as_slice() {
        return Err(TensorError::Dimension(format!(
            "sample shape {:?} does not match model shape {shape:?}",
            x.shape()
        )));
    }
    Ok(contract(x.shape(), x.values(), &m.mode_vectors, None)[0] + m.bias)
}

/// `sign(decision)` with ties going to `+1`.
pub fn lsstm_predict(m: &LsstmModel, x: &Tensor) -> Result<i8> {
    Ok(label_of(lsstm_decision(m, x)?))
}
