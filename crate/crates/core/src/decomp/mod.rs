//! Tensor decompositions: CPD (ALS and randomized), HOSVD, HOOI and TT-SVD.

mod cpd;
mod tt;
mod tucker;

pub use cpd::{cpd_als, cpd_randomized};
pub use tt::{tt_svd, TtTarget};
pub use tucker::{hooi, hosvd};

pub(crate) use cpd::{als_update, initial_factors};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::forms::Form;

/// Options shared by the iterative fitting routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Threshold on the absolute change of the tracked error between sweeps.
    pub tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub verbose: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 50,
            tol: 1e-8,
            seed: 0,
            verbose: false,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(TensorError::Argument("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(TensorError::Argument("tol must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// A fitted form plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub form: Form,
    pub iterations: usize,
    /// Relative error after each iteration; `len() == iterations`.
    pub error_trace: Vec<f64>,
    pub converged: bool,
}

impl DecompositionResult {
    pub fn rel_error(&self) -> f64 {
        self.error_trace.last().copied().unwrap_or(f64::NAN)
    }
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Checks multilinear ranks against a shape.
pub(crate) fn check_ranks(shape: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != shape.len() {
        return Err(TensorError::Argument(format!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            shape.len()
        )));
    }
    for (n, (&r, &d)) in ranks.iter().zip(shape).enumerate() {
        if r < 1 || r > d {
            return Err(TensorError::Argument(format!(
                "rank {r} for mode {n} outside 1..={d}"
            )));
        }
    }
    Ok(())
}
