use serde::{Deserialize, Serialize};

use super::{label_of, TensorDataset};
use crate::decomp::{cpd_als, hosvd, FitOptions};
use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// A trained classifier on plain vectors.
pub trait Classifier {
    fn predict(&self, v: &[f64]) -> Result<i8>;
}

/// Builds one base learner per slot dataset.
pub trait LearnerFactory {
    type Model: Classifier;
    fn train(&self, vectors: &[Vec<f64>], labels: &[i8]) -> Result<Self::Model>;
}

/// How each sample is decomposed before its factor columns are split into
/// slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum DecompositionSpec {
    /// CP decomposition; `N * rank` slots.
    Cpd { rank: usize },
    /// Truncated HOSVD; `Σ ranks[n]` slots.
    Tkd { ranks: Vec<usize> },
}

impl DecompositionSpec {
    pub(crate) fn validate(&self, shape: &[usize]) -> Result<()> {
        match self {
            DecompositionSpec::Cpd { rank } => {
                if *rank < 1 {
                    return Err(TensorError::Argument("CPD rank must be >= 1".into()));
                }
            }
            DecompositionSpec::Tkd { ranks } => {
                if ranks.len() != shape.len() {
                    return Err(TensorError::Argument(format!(
                        "{} Tucker ranks for an order-{} sample",
                        ranks.len(),
                        shape.len()
                    )));
                }
                for (n, (&r, &dim)) in ranks.iter().zip(shape).enumerate() {
                    if r < 1 || r > dim {
                        return Err(TensorError::Argument(format!(
                            "Tucker rank {r} for mode {n} outside 1..={dim}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of `(mode, component)` slots for samples of the given order.
    pub fn slot_count(&self, order: usize) -> usize {
        match self {
            DecompositionSpec::Cpd { rank } => order * rank,
            DecompositionSpec::Tkd { ranks } => ranks.iter().sum(),
        }
    }
}

/// Unweighted majority vote; an exact tie goes to `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vote {
    #[default]
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLearner<M> {
    pub mode: usize,
    pub component: usize,
    pub learner: M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelModel<M> {
    pub spec: DecompositionSpec,
    pub learners: Vec<SlotLearner<M>>,
    pub vote: Vote,
    /// Shape every sample must have.
    pub shape: Vec<usize>,
    /// Options used for the per-sample decompositions, at training and at
    /// prediction time.
    pub options: FitOptions,
}

/// Factor columns of one sample, ordered mode-major: `slots[n][r]`.
fn slot_vectors(x: &Tensor, spec: &DecompositionSpec, opts: &FitOptions) -> Result<Vec<Vec<Vec<f64>>>> {
    match spec {
        DecompositionSpec::Cpd { rank } => {
            let res = cpd_als(x, *rank, opts)?;
            let cpd = res.form.as_cpd().expect("cpd_als returns a CPD");
            Ok(cpd
                .factors()
                .iter()
                .enumerate()
                .map(|(n, f)| {
                    (0..*rank)
                        .map(|r| {
                            let scale = if n == 0 { cpd.weights()[r] } else { 1.0 };
                            f.column(r).iter().map(|v| v * scale).collect()
                        })
                        .collect()
                })
                .collect())
        }
        DecompositionSpec::Tkd { ranks } => {
            let res = hosvd(x, ranks)?;
            let tkd = res.form.as_tkd().expect("hosvd returns a Tucker form");
            Ok(tkd
                .factors()
                .iter()
                .map(|f| (0..f.ncols()).map(|r| f.column(r).iter().copied().collect()).collect())
                .collect())
        }
    }
}

/// Tensor ensemble learning.
///
/// Every sample is decomposed with the given spec. The `r`-th column of mode
/// `n`'s factor forms the sample's vector for slot `(n, r)`; for CPD the
/// component weight is folded into the mode-0 column only. One base learner
/// is trained per slot.
pub fn tel_train<F: LearnerFactory>(
    d: &TensorDataset,
    spec: &DecompositionSpec,
    base: &F,
    opts: &FitOptions,
) -> Result<TelModel<F::Model>> {
    opts.validate()?;
    let shape = d.sample_shape().to_vec();
    spec.validate(&shape)?;
    d.require_both_classes()?;
    let per_sample = d
        .samples()
        .iter()
        .enumerate()
        .map(|(i, x)| slot_vectors(x, spec, opts).map_err(|e| e.context(format!("sample {i}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut learners = Vec::with_capacity(spec.slot_count(shape.len()));
    for n in 0..shape.len() {
        for r in 0..per_sample[0][n].len() {
            let vectors: Vec<Vec<f64>> = per_sample.iter().map(|s| s[n][r].clone()).collect();
            let learner = base
                .train(&vectors, d.labels())
                .map_err(|e| e.context(format!("slot (mode {n}, component {r})")))?;
            learners.push(SlotLearner {
                mode: n,
                component: r,
                learner,
            });
        }
    }
    Ok(TelModel {
        spec: spec.clone(),
        learners,
        vote: Vote::Majority,
        shape,
        options: *opts,
    })
}

pub fn tel_predict<M: Classifier>(m: &TelModel<M>, x: &Tensor) -> Result<i8> {
    if x.shape() != m.shape.as_slice() {
        return Err(TensorError::Dimension(format!(
            "sample shape {:?} does not match model shape {:?}",
            x.shape(),
            m.shape
        )));
    }
    let slots = slot_vectors(x, &m.spec, &m.options)?;
    let mut tally = 0i64;
    for l in &m.learners {
        let v = slots
            .get(l.mode)
            .and_then(|s| s.get(l.component))
            .ok_or_else(|| {
                TensorError::Data(format!(
                    "learner for slot (mode {}, component {}) has no matching factor column",
                    l.mode, l.component
                ))
            })?;
        tally += i64::from(l.learner.predict(v)?);
    }
    match m.vote {
        Vote::Majority => Ok(label_of(tally as f64)),
    }
}
