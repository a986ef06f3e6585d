use serde::{Deserialize, Serialize};

use super::tel::{Classifier, LearnerFactory};
use super::{label_of, ls_svm_dual, require_both_classes};
use crate::error::{Result, TensorError};
use crate::ops::dot;
use crate::Matrix;

/// Linear least-squares SVM on plain vectors, stored in primal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LsSvm {
    /// Fits `min ½|w|² + (c/2) Σ (y_i - w·x_i - b)²` through its dual.
    pub fn train(vectors: &[Vec<f64>], labels: &[i8], c: f64) -> Result<LsSvm> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(TensorError::Argument(format!("C must be > 0, got {c}")));
        }
        if vectors.len() != labels.len() || vectors.is_empty() {
            return Err(TensorError::Data(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        require_both_classes(labels)?;
        let dim = vectors[0].len();
        if let Some(i) = vectors.iter().position(|v| v.len() != dim) {
            return Err(TensorError::Dimension(format!(
                "vector {i} has length {}, vector 0 has {dim}",
                vectors[i].len()
            )));
        }
        let n = vectors.len();
        let gram = Matrix::from_fn(n, n, |i, j| dot(&vectors[i], &vectors[j]));
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let (bias, beta) = ls_svm_dual(&gram, &y, 1.0 / c)?;
        let mut weights = vec![0.0; dim];
        for (b, v) in beta.iter().zip(vectors) {
            for (w, x) in weights.iter_mut().zip(v) {
                *w += b * x;
            }
        }
        Ok(LsSvm { weights, bias })
    }

    pub fn decision(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.weights.len() {
            return Err(TensorError::Dimension(format!(
                "vector of length {} for a model of length {}",
                v.len(),
                self.weights.len()
            )));
        }
        Ok(dot(&self.weights, v) + self.bias)
    }
}

impl Classifier for LsSvm {
    fn predict(&self, v: &[f64]) -> Result<i8> {
        Ok(label_of(self.decision(v)?))
    }
}

/// Trains [`LsSvm`] base learners with a fixed regulariser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsSvmFactory {
    pub c: f64,
}

impl Default for LsSvmFactory {
    fn default() -> Self {
        LsSvmFactory { c: 10.0 }
    }
}

impl LearnerFactory for LsSvmFactory {
    type Model = LsSvm;

    fn train(&self, vectors: &[Vec<f64>], labels: &[i8]) -> Result<LsSvm> {
        LsSvm::train(vectors, labels, self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_points_on_a_line() {
        let xs: Vec<Vec<f64>> = [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0].iter().map(|&x| vec![x]).collect();
        let ys = [-1, -1, -1, 1, 1, 1];
        let m = LsSvm::train(&xs, &ys, 100.0).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(m.predict(x).unwrap(), y);
        }
        // symmetric data: no offset
        assert!(m.bias.abs() < 1e-12);
    }

    #[test]
    fn argument_and_data_errors() {
        let xs = vec![vec![1.0], vec![2.0]];
        assert!(matches!(LsSvm::train(&xs, &[1, -1], 0.0), Err(TensorError::Argument(_))));
        assert!(matches!(LsSvm::train(&xs, &[1, 1], 1.0), Err(TensorError::Data(_))));
        let m = LsSvm::train(&xs, &[1, -1], 1.0).unwrap();
        assert!(m.decision(&[1.0, 2.0]).is_err());
    }
}
