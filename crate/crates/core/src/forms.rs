//! Kruskal (CPD), Tucker (TKD) and Tensor-Train (TT) representations.
//!
//! All three share [`EfficientForm`]: a target shape, per-mode metadata and a
//! dense reconstruction. Constructors check the structural invariants, so a
//! form that exists is always reconstructible.

use crate::error::{Result, TensorError};
use crate::ops::{norm, sq_dist};
use crate::tensor::{default_modes, mode_product_values, Mode, Tensor};
use crate::Matrix;

/// Common interface of the efficient representations.
pub trait EfficientForm {
    /// Shape of the tensor this form represents.
    fn full_shape(&self) -> Vec<usize>;

    fn modes(&self) -> &[Mode];

    /// Dense tensor carrying this form's mode metadata.
    fn reconstruct(&self) -> Result<Tensor>;
}

fn check_modes(modes: &[Mode], shape: &[usize]) -> Result<()> {
    if modes.len() != shape.len() {
        return Err(TensorError::Form(format!(
            "{} modes for an order-{} form",
            modes.len(),
            shape.len()
        )));
    }
    for (m, &d) in modes.iter().zip(shape) {
        m.validate(d).map_err(|e| TensorError::Form(e.to_string()))?;
    }
    Ok(())
}

/// Kruskal form: `sum_r weights[r] * a_r^(1) o ... o a_r^(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCPD {
    weights: Vec<f64>,
    factors: Vec<Matrix>,
    modes: Vec<Mode>,
}

impl TensorCPD {
    pub fn new(weights: Vec<f64>, factors: Vec<Matrix>, modes: Option<Vec<Mode>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(TensorError::Form("a CPD needs at least one factor".into()));
        }
        let rank = weights.len();
        if rank == 0 {
            return Err(TensorError::Form("CPD rank must be >= 1".into()));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.ncols() != rank {
                return Err(TensorError::Form(format!(
                    "factor {n} has {} columns, expected rank {rank}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(TensorError::Form(format!("factor {n} has no rows")));
            }
        }
        let shape: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        let modes = modes.unwrap_or_else(|| default_modes(shape.len()));
        check_modes(&modes, &shape)?;
        Ok(TensorCPD {
            weights,
            factors,
            modes,
        })
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn with_modes(mut self, modes: Vec<Mode>) -> Result<Self> {
        check_modes(&modes, &self.full_shape())?;
        self.modes = modes;
        Ok(self)
    }

    /// Unit-norm factor columns with magnitudes moved into the weights; the
    /// largest-magnitude entry of every column is made non-negative, the
    /// compensating sign going into the weight. A zero column zeroes its
    /// weight.
    pub fn normalised(&self) -> TensorCPD {
        let mut weights = self.weights.clone();
        let mut factors = self.factors.clone();
        for (r, w) in weights.iter_mut().enumerate() {
            for f in factors.iter_mut() {
                let mut col = f.column_mut(r);
                let n = col.norm();
                if n > 0.0 {
                    col /= n;
                    *w *= n;
                } else {
                    *w = 0.0;
                }
                let mut pivot = 0.0f64;
                for &v in col.iter() {
                    if v.abs() > pivot.abs() {
                        pivot = v;
                    }
                }
                if pivot < 0.0 {
                    col.neg_mut();
                    *w = -*w;
                }
            }
        }
        TensorCPD {
            weights,
            factors,
            modes: self.modes.clone(),
        }
    }

    /// True when every column with a non-zero weight has unit norm within `tol`.
    pub fn is_normalised(&self, tol: f64) -> bool {
        (0..self.rank()).all(|r| {
            self.weights[r] == 0.0
                || self
                    .factors
                    .iter()
                    .all(|f| (f.column(r).norm() - 1.0).abs() <= tol)
        })
    }

    /// Same factors, weights multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> TensorCPD {
        TensorCPD {
            weights: self.weights.iter().map(|w| w * alpha).collect(),
            factors: self.factors.clone(),
            modes: self.modes.clone(),
        }
    }

    pub fn to_tkd(&self) -> TensorTKD {
        cpd_to_tkd(self)
    }
}

impl EfficientForm for TensorCPD {
    fn full_shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    fn modes(&self) -> &[Mode] {
        &self.modes
    }

    fn reconstruct(&self) -> Result<Tensor> {
        let shape = self.full_shape();
        let size: usize = shape.iter().product();
        let order = shape.len();
        let mut values = Vec::with_capacity(size);
        let mut idx = vec![0usize; order];
        for _ in 0..size {
            let mut v = 0.0;
            for (r, &w) in self.weights.iter().enumerate() {
                let mut term = w;
                for (f, &i) in self.factors.iter().zip(&idx) {
                    term *= f[(i, r)];
                }
                v += term;
            }
            values.push(v);
            for k in (0..order).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Tensor::from_parts(shape, values, self.modes.clone(), Vec::new())
    }
}

/// Tucker form: `core x_1 A^(1) ... x_N A^(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTKD {
    core: Tensor,
    factors: Vec<Matrix>,
    modes: Vec<Mode>,
}

impl TensorTKD {
    pub fn new(core: Tensor, factors: Vec<Matrix>, modes: Option<Vec<Mode>>) -> Result<Self> {
        if core.order() != factors.len() {
            return Err(TensorError::Form(format!(
                "core of order {} with {} factors",
                core.order(),
                factors.len()
            )));
        }
        for (n, (f, &r)) in factors.iter().zip(core.shape()).enumerate() {
            if f.ncols() != r {
                return Err(TensorError::Form(format!(
                    "factor {n} has {} columns but the core has {r} along mode {n}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(TensorError::Form(format!("factor {n} has no rows")));
            }
        }
        let shape: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        let modes = modes.unwrap_or_else(|| default_modes(shape.len()));
        check_modes(&modes, &shape)?;
        Ok(TensorTKD {
            core: core.into_raw(),
            factors,
            modes,
        })
    }

    pub fn core(&self) -> &Tensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// Multilinear ranks (core shape).
    pub fn ranks(&self) -> &[usize] {
        self.core.shape()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn with_modes(mut self, modes: Vec<Mode>) -> Result<Self> {
        check_modes(&modes, &self.full_shape())?;
        self.modes = modes;
        Ok(self)
    }
}

impl EfficientForm for TensorTKD {
    fn full_shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    fn modes(&self) -> &[Mode] {
        &self.modes
    }

    fn reconstruct(&self) -> Result<Tensor> {
        let mut shape = self.core.shape().to_vec();
        let mut values = self.core.values().to_vec();
        for (n, f) in self.factors.iter().enumerate() {
            let (s, v) = mode_product_values(&shape, &values, f, n)?;
            shape = s;
            values = v;
        }
        Tensor::from_parts(shape, values, self.modes.clone(), Vec::new())
    }
}

/// Tensor-Train form: a chain of order-3 cores `r_{n-1} x I_n x r_n` with
/// unit boundary ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTT {
    cores: Vec<Tensor>,
    modes: Vec<Mode>,
}

impl TensorTT {
    pub fn new(cores: Vec<Tensor>, modes: Option<Vec<Mode>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TensorError::Form("a TT needs at least one core".into()));
        }
        for (n, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(TensorError::Form(format!(
                    "core {n} has order {}, expected 3",
                    c.order()
                )));
            }
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[2] != 1 {
            return Err(TensorError::Form("boundary TT ranks must be 1".into()));
        }
        for (n, w) in cores.windows(2).enumerate() {
            if w[0].shape()[2] != w[1].shape()[0] {
                return Err(TensorError::Form(format!(
                    "bond mismatch between cores {n} and {}: {} vs {}",
                    n + 1,
                    w[0].shape()[2],
                    w[1].shape()[0]
                )));
            }
        }
        let shape: Vec<usize> = cores.iter().map(|c| c.shape()[1]).collect();
        let modes = modes.unwrap_or_else(|| default_modes(shape.len()));
        check_modes(&modes, &shape)?;
        Ok(TensorTT {
            cores: cores.into_iter().map(Tensor::into_raw).collect(),
            modes,
        })
    }

    pub fn cores(&self) -> &[Tensor] {
        &self.cores
    }

    /// Bond dimensions including the two unit boundaries (length N + 1).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.shape()[2]));
        r
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// Replaces core `n`; the bond chain must still line up.
    pub fn with_core(&self, n: usize, core: Tensor) -> Result<Self> {
        if n >= self.cores.len() {
            return Err(TensorError::Index(format!("core {n} out of range")));
        }
        let mut cores = self.cores.clone();
        cores[n] = core;
        TensorTT::new(cores, Some(self.modes.clone()))
    }

    pub fn with_modes(mut self, modes: Vec<Mode>) -> Result<Self> {
        check_modes(&modes, &self.full_shape())?;
        self.modes = modes;
        Ok(self)
    }
}

impl EfficientForm for TensorTT {
    fn full_shape(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    fn modes(&self) -> &[Mode] {
        &self.modes
    }

    fn reconstruct(&self) -> Result<Tensor> {
        // acc is row-major (prefix_size x bond)
        let mut acc = vec![1.0];
        let mut prefix = 1usize;
        let mut bond = 1usize;
        for core in &self.cores {
            let (i_n, next) = (core.shape()[1], core.shape()[2]);
            let g = core.values();
            let mut out = vec![0.0; prefix * i_n * next];
            for p in 0..prefix {
                for a in 0..bond {
                    let x = acc[p * bond + a];
                    if x == 0.0 {
                        continue;
                    }
                    let src = &g[a * i_n * next..(a + 1) * i_n * next];
                    let dst = &mut out[p * i_n * next..(p + 1) * i_n * next];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += x * s;
                    }
                }
            }
            acc = out;
            prefix *= i_n;
            bond = next;
        }
        Tensor::from_parts(self.full_shape(), acc, self.modes.clone(), Vec::new())
    }
}

/// Any of the three efficient representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    Cpd(TensorCPD),
    Tkd(TensorTKD),
    Tt(TensorTT),
}

impl Form {
    pub fn kind(&self) -> &'static str {
        match self {
            Form::Cpd(_) => "cpd",
            Form::Tkd(_) => "tkd",
            Form::Tt(_) => "tt",
        }
    }

    pub fn as_cpd(&self) -> Option<&TensorCPD> {
        match self {
            Form::Cpd(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_tkd(&self) -> Option<&TensorTKD> {
        match self {
            Form::Tkd(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_tt(&self) -> Option<&TensorTT> {
        match self {
            Form::Tt(t) => Some(t),
            _ => None,
        }
    }
}

impl EfficientForm for Form {
    fn full_shape(&self) -> Vec<usize> {
        match self {
            Form::Cpd(f) => f.full_shape(),
            Form::Tkd(f) => f.full_shape(),
            Form::Tt(f) => f.full_shape(),
        }
    }

    fn modes(&self) -> &[Mode] {
        match self {
            Form::Cpd(f) => f.modes(),
            Form::Tkd(f) => f.modes(),
            Form::Tt(f) => f.modes(),
        }
    }

    fn reconstruct(&self) -> Result<Tensor> {
        match self {
            Form::Cpd(f) => f.reconstruct(),
            Form::Tkd(f) => f.reconstruct(),
            Form::Tt(f) => f.reconstruct(),
        }
    }
}

impl From<TensorCPD> for Form {
    fn from(f: TensorCPD) -> Self {
        Form::Cpd(f)
    }
}

impl From<TensorTKD> for Form {
    fn from(f: TensorTKD) -> Self {
        Form::Tkd(f)
    }
}

impl From<TensorTT> for Form {
    fn from(f: TensorTT) -> Self {
        Form::Tt(f)
    }
}

/// Tucker form with a superdiagonal core holding the CPD weights.
pub fn cpd_to_tkd(c: &TensorCPD) -> TensorTKD {
    let r = c.rank();
    let n = c.order();
    let shape = vec![r; n];
    let mut values = vec![0.0; r.pow(n as u32)];
    // offset of (k, k, ..., k) is k * (r^(n-1) + ... + r + 1)
    let step: usize = (0..n).map(|p| r.pow(p as u32)).sum();
    for (k, &w) in c.weights().iter().enumerate() {
        values[k * step] = w;
    }
    let core = Tensor::new(shape, values).expect("superdiagonal core is well formed");
    TensorTKD {
        core,
        factors: c.factors().to_vec(),
        modes: c.modes().to_vec(),
    }
}

/// `||x - reconstruct(form)|| / ||x||`, or the absolute error when `x` is zero.
pub fn rel_error(x: &Tensor, form: &impl EfficientForm) -> Result<f64> {
    let shape = form.full_shape();
    if x.shape() != shape.as_slice() {
        return Err(TensorError::Dimension(format!(
            "data shape {:?} does not match form shape {shape:?}",
            x.shape()
        )));
    }
    let rec = form.reconstruct()?;
    Ok(rel_error_values(x.values(), rec.values()))
}

pub(crate) fn rel_error_values(x: &[f64], approx: &[f64]) -> f64 {
    let nx = norm(x);
    let diff = sq_dist(x, approx).sqrt();
    if nx == 0.0 {
        diff
    } else {
        diff / nx
    }
}
