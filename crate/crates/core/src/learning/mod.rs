//! Supervised learning on tensor samples.
//!
//! [`lsstm_train`] fits a least-squares support tensor machine whose weight
//! tensor is rank one. [`tel_train`] decomposes every sample, trains one base
//! classifier per factor column slot and predicts by majority vote.

mod lsstm;
mod lssvm;
mod tel;

pub use lsstm::{lsstm_decision, lsstm_predict, lsstm_train, LsstmModel};
pub use lssvm::{LsSvm, LsSvmFactory};
pub use tel::{
    tel_predict, tel_train, Classifier, DecompositionSpec, LearnerFactory, SlotLearner, TelModel,
    Vote,
};

use crate::error::{Result, TensorError};
use crate::linalg::pinv;
use crate::tensor::Tensor;
use crate::Matrix;

/// Labelled tensor samples of a common shape; labels are `-1` or `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDataset {
    samples: Vec<Tensor>,
    labels: Vec<i8>,
}

impl TensorDataset {
    pub fn new(samples: Vec<Tensor>, labels: Vec<i8>) -> Result<Self> {
        if samples.is_empty() {
            return Err(TensorError::Data("dataset has no samples".into()));
        }
        if samples.len() != labels.len() {
            return Err(TensorError::Data(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        let shape = samples[0].shape();
        for (i, s) in samples.iter().enumerate() {
            if s.shape() != shape {
                return Err(TensorError::Dimension(format!(
                    "sample {i} has shape {:?}, sample 0 has {shape:?}",
                    s.shape()
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&l| l != 1 && l != -1) {
            return Err(TensorError::Data(format!(
                "label {} at position {i} is not -1 or +1",
                labels[i]
            )));
        }
        Ok(TensorDataset { samples, labels })
    }

    pub fn samples(&self) -> &[Tensor] {
        &self.samples
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        self.samples[0].shape()
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        require_both_classes(&self.labels)
    }
}

pub(crate) fn require_both_classes(labels: &[i8]) -> Result<()> {
    let pos = labels.iter().any(|&l| l > 0);
    let neg = labels.iter().any(|&l| l < 0);
    if pos && neg {
        Ok(())
    } else {
        Err(TensorError::Data(
            "training needs samples of both classes".into(),
        ))
    }
}

/// `sign` with `sign(0) = +1`.
pub(crate) fn label_of(decision: f64) -> i8 {
    if decision >= 0.0 {
        1
    } else {
        -1
    }
}

/// LS-SVM dual system
/// `[0 1^T; 1 G + ridge I] [b; beta] = [0; y]` for a linear-kernel Gram
/// matrix `G`. Returns `(b, beta)`.
pub(crate) fn ls_svm_dual(gram: &Matrix, y: &[f64], ridge: f64) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    let mut kkt = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        kkt[(0, i + 1)] = 1.0;
        kkt[(i + 1, 0)] = 1.0;
        for j in 0..n {
            kkt[(i + 1, j + 1)] = gram[(i, j)];
        }
        kkt[(i + 1, i + 1)] += ridge;
    }
    let mut rhs = Matrix::zeros(n + 1, 1);
    for i in 0..n {
        rhs[(i + 1, 0)] = y[i];
    }
    let sol = match kkt.clone().lu().solve(&rhs) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => pinv(&kkt, 1e-14)? * rhs,
    };
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(TensorError::Numeric("LS-SVM system has no finite solution".into()));
    }
    Ok((sol[0], sol.iter().skip(1).copied().collect()))
}
