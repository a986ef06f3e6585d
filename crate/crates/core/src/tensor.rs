//! Dense tensors with per-mode metadata and a log of rearrangements.
//!
//! Values are stored row-major (last index fastest). Unfoldings use the
//! Kolda-Bader column ordering: the remaining modes enumerate columns in
//! ascending mode order with the earliest mode varying fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::Matrix;

/// A named dimension, optionally carrying one label per index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
}

impl Mode {
    pub fn new(name: impl Into<String>) -> Self {
        Mode {
            name: name.into(),
            features: None,
        }
    }

    pub fn with_features(name: impl Into<String>, features: Vec<String>) -> Self {
        Mode {
            name: name.into(),
            features: Some(features),
        }
    }

    /// Checks this mode against the size of the dimension it describes.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.name.is_empty() {
            return Err(TensorError::validation("modes", "mode name must be non-empty"));
        }
        if let Some(f) = &self.features {
            if f.len() != dim {
                return Err(TensorError::validation(
                    "modes",
                    format!(
                        "mode `{}` has {} feature labels for a dimension of size {}",
                        self.name,
                        f.len(),
                        dim
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Same name, features dropped.
    pub fn reset(&self) -> Self {
        Mode::new(self.name.clone())
    }
}

/// Default mode names `mode-0`, `mode-1`, ...
pub fn default_modes(order: usize) -> Vec<Mode> {
    (0..order).map(|n| Mode::new(format!("mode-{n}"))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Unfold,
    Vectorise,
    ModeNProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    KoldaBader,
    RowMajor,
}

/// One rearrangement applied to a tensor. Holds everything needed to undo it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    pub ordering: Ordering,
    pub prior_shape: Vec<usize>,
    pub prior_modes: Vec<Mode>,
}

impl StateRecord {
    pub fn validate(&self) -> Result<()> {
        if self.prior_shape.is_empty() || self.prior_shape.contains(&0) {
            return Err(TensorError::validation(
                "state",
                "prior_shape entries must all be >= 1",
            ));
        }
        if self.prior_modes.len() != self.prior_shape.len() {
            return Err(TensorError::validation(
                "state",
                "prior_modes length must equal prior_shape length",
            ));
        }
        for (m, &d) in self.prior_modes.iter().zip(&self.prior_shape) {
            m.validate(d)?;
        }
        if let Some(n) = self.mode {
            if n >= self.prior_shape.len() {
                return Err(TensorError::validation("state", "mode index out of range"));
            }
        }
        Ok(())
    }

    /// Shape produced by applying this record to a tensor of `prior_shape`.
    fn resulting_shape(&self, current_dim: Option<usize>) -> Option<Vec<usize>> {
        let total: usize = self.prior_shape.iter().product();
        match self.kind {
            StateKind::Unfold => {
                let n = self.mode?;
                Some(vec![self.prior_shape[n], total / self.prior_shape[n]])
            }
            StateKind::Vectorise => Some(vec![total]),
            StateKind::ModeNProduct => {
                let mut s = self.prior_shape.clone();
                s[self.mode?] = current_dim?;
                Some(s)
            }
        }
    }
}

/// Dense N-dimensional array of `f64` with mode metadata and state log.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    modes: Vec<Mode>,
    state: Vec<StateRecord>,
}

impl Tensor {
    /// Raw tensor with default mode names.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let order = shape.len();
        Self::from_parts(shape, values, default_modes(order), Vec::new())
    }

    /// Raw tensor with the given mode names (or defaults when `None`).
    pub fn with_mode_names(
        shape: Vec<usize>,
        values: Vec<f64>,
        names: Option<&[&str]>,
    ) -> Result<Self> {
        let modes = match names {
            Some(names) => names.iter().map(|n| Mode::new(*n)).collect(),
            None => default_modes(shape.len()),
        };
        Self::from_parts(shape, values, modes, Vec::new())
    }

    pub fn from_parts(
        shape: Vec<usize>,
        values: Vec<f64>,
        modes: Vec<Mode>,
        state: Vec<StateRecord>,
    ) -> Result<Self> {
        if shape.is_empty() {
            return Err(TensorError::Dimension("tensor shape must be non-empty".into()));
        }
        if shape.contains(&0) {
            return Err(TensorError::Dimension(format!(
                "tensor dimensions must be >= 1, got {shape:?}"
            )));
        }
        let size: usize = shape.iter().product();
        if size != values.len() {
            return Err(TensorError::Dimension(format!(
                "shape {shape:?} needs {size} values, got {}",
                values.len()
            )));
        }
        if modes.len() != shape.len() {
            return Err(TensorError::Dimension(format!(
                "{} modes given for an order-{} tensor",
                modes.len(),
                shape.len()
            )));
        }
        for (m, &d) in modes.iter().zip(&shape) {
            m.validate(d)?;
        }
        for r in &state {
            r.validate()?;
        }
        Ok(Tensor {
            shape,
            values,
            modes,
            state,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let size = shape.iter().product();
        Self::new(shape, vec![0.0; size])
    }

    /// Order-2 tensor holding the matrix `m`.
    pub fn from_matrix(m: &Matrix) -> Self {
        let values = crate::ops::to_row_major(m);
        Tensor {
            shape: vec![m.nrows(), m.ncols()],
            values,
            modes: default_modes(2),
            state: Vec::new(),
        }
    }

    /// Interprets an order-2 tensor as a matrix.
    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.order() != 2 {
            return Err(TensorError::Dimension(format!(
                "expected an order-2 tensor, got order {}",
                self.order()
            )));
        }
        Ok(Matrix::from_row_slice(
            self.shape[0],
            self.shape[1],
            &self.values,
        ))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn state(&self) -> &[StateRecord] {
        &self.state
    }

    pub fn is_raw(&self) -> bool {
        self.state.is_empty()
    }

    /// Shape of the tensor before any recorded rearrangement.
    pub fn original_shape(&self) -> &[usize] {
        self.state
            .first()
            .map(|r| r.prior_shape.as_slice())
            .unwrap_or(&self.shape)
    }

    /// Replays the state log from the original shape; `true` if it lands on
    /// the current shape.
    pub fn state_is_consistent(&self) -> bool {
        let mut shape = self.original_shape().to_vec();
        for (i, r) in self.state.iter().enumerate() {
            if r.prior_shape != shape {
                return false;
            }
            // A mode-n product's new size is the prior size recorded by the
            // next record, or the current shape for the last one.
            let new_dim = r.mode.map(|n| {
                self.state
                    .get(i + 1)
                    .map(|next| next.prior_shape.get(n).copied().unwrap_or(0))
                    .unwrap_or_else(|| self.shape.get(n).copied().unwrap_or(0))
            });
            match r.resulting_shape(new_dim) {
                Some(s) => shape = s,
                None => return false,
            }
        }
        shape == self.shape
    }

    /// Replaces the metadata of one mode.
    pub fn with_mode(mut self, n: usize, mode: Mode) -> Result<Self> {
        if n >= self.order() {
            return Err(TensorError::Index(format!(
                "mode {n} out of range for order {}",
                self.order()
            )));
        }
        mode.validate(self.shape[n])?;
        self.modes[n] = mode;
        Ok(self)
    }

    pub fn with_modes(mut self, modes: Vec<Mode>) -> Result<Self> {
        if modes.len() != self.order() {
            return Err(TensorError::Dimension(format!(
                "{} modes given for an order-{} tensor",
                modes.len(),
                self.order()
            )));
        }
        for (m, &d) in modes.iter().zip(&self.shape) {
            m.validate(d)?;
        }
        self.modes = modes;
        Ok(self)
    }

    /// Flat row-major offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order() {
            return Err(TensorError::Index(format!(
                "index of length {} for an order-{} tensor",
                index.len(),
                self.order()
            )));
        }
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return Err(TensorError::Index(format!("index {index:?} out of bounds")));
            }
            off = off * d + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.offset(index)?])
    }

    /// Mode-`mode` unfolding as a matrix, no metadata.
    pub fn unfold_matrix(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        Ok(unfold_values(&self.shape, &self.values, mode))
    }

    /// Mode-`mode` unfolding; records the rearrangement so `fold` can undo it.
    pub fn unfold(&self, mode: usize) -> Result<Tensor> {
        self.check_mode(mode)?;
        let m = unfold_values(&self.shape, &self.values, mode);
        let rest_name = self
            .modes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != mode)
            .map(|(_, m)| m.name.as_str())
            .collect::<Vec<_>>()
            .join("*");
        let rest_name = if rest_name.is_empty() {
            "unit".to_string()
        } else {
            rest_name
        };
        let mut state = self.state.clone();
        state.push(StateRecord {
            kind: StateKind::Unfold,
            mode: Some(mode),
            ordering: Ordering::KoldaBader,
            prior_shape: self.shape.clone(),
            prior_modes: self.modes.clone(),
        });
        Ok(Tensor {
            shape: vec![m.nrows(), m.ncols()],
            values: crate::ops::to_row_major(&m),
            modes: vec![self.modes[mode].clone(), Mode::new(rest_name)],
            state,
        })
    }

    /// Undoes the most recent unfold or vectorise.
    pub fn fold(&self) -> Result<Tensor> {
        let last = self
            .state
            .last()
            .ok_or_else(|| TensorError::State("tensor already in raw state".into()))?;
        let prior_size: usize = last.prior_shape.iter().product();
        if prior_size != self.size() {
            return Err(TensorError::Dimension(format!(
                "cannot fold {} values back into shape {:?}",
                self.size(),
                last.prior_shape
            )));
        }
        let values = match (last.kind, last.mode) {
            (StateKind::Unfold, Some(mode)) => {
                let expected = [
                    last.prior_shape[mode],
                    prior_size / last.prior_shape[mode],
                ];
                if self.shape != expected {
                    return Err(TensorError::Dimension(format!(
                        "unfolded shape {:?} does not match recorded {:?}",
                        self.shape, expected
                    )));
                }
                let m = self.to_matrix()?;
                fold_matrix(&m, &last.prior_shape, mode)
            }
            (StateKind::Vectorise, _) => self.values.clone(),
            _ => {
                return Err(TensorError::State(
                    "last transformation is not an unfold or vectorise".into(),
                ))
            }
        };
        let mut state = self.state.clone();
        let last = state.pop().expect("checked non-empty");
        Ok(Tensor {
            shape: last.prior_shape,
            values,
            modes: last.prior_modes,
            state,
        })
    }

    /// Flattens to a vector in row-major order.
    pub fn vectorise(&self) -> Tensor {
        let name = self
            .modes
            .iter()
            .map(|m| m.name.as_str())
            .collect::<Vec<_>>()
            .join("*");
        let mut state = self.state.clone();
        state.push(StateRecord {
            kind: StateKind::Vectorise,
            mode: None,
            ordering: Ordering::RowMajor,
            prior_shape: self.shape.clone(),
            prior_modes: self.modes.clone(),
        });
        Tensor {
            shape: vec![self.size()],
            values: self.values.clone(),
            modes: vec![Mode::new(name)],
            state,
        }
    }

    /// Mode-n product with a `J × I_mode` matrix.
    ///
    /// The multiplied mode keeps its name but loses its feature labels.
    pub fn mode_n_product(&self, m: &Matrix, mode: usize) -> Result<Tensor> {
        self.check_mode(mode)?;
        let (shape, values) = mode_product_values(&self.shape, &self.values, m, mode)?;
        let mut modes = self.modes.clone();
        modes[mode] = modes[mode].reset();
        let mut state = self.state.clone();
        state.push(StateRecord {
            kind: StateKind::ModeNProduct,
            mode: Some(mode),
            ordering: Ordering::RowMajor,
            prior_shape: self.shape.clone(),
            prior_modes: self.modes.clone(),
        });
        Ok(Tensor {
            shape,
            values,
            modes,
            state,
        })
    }

    /// Copy of this tensor with the state log cleared.
    pub fn into_raw(mut self) -> Tensor {
        self.state.clear();
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            modes: self.modes.clone(),
            state: self.state.clone(),
        }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            Err(TensorError::Index(format!(
                "mode {mode} out of range for an order-{} tensor",
                self.order()
            )))
        } else {
            Ok(())
        }
    }
}

/// Column strides of the Kolda-Bader mode-`mode` unfolding, one per mode
/// (zero for `mode` itself).
fn kolda_strides(shape: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for (k, &d) in shape.iter().enumerate() {
        if k != mode {
            strides[k] = acc;
            acc *= d;
        }
    }
    strides
}

/// Advances a row-major multi-index by one position.
#[inline]
fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..shape.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

pub(crate) fn unfold_values(shape: &[usize], values: &[f64], mode: usize) -> Matrix {
    let rows = shape[mode];
    let cols = values.len() / rows;
    let strides = kolda_strides(shape, mode);
    let mut m = Matrix::zeros(rows, cols);
    let mut idx = vec![0; shape.len()];
    for &v in values {
        let col: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        m[(idx[mode], col)] = v;
        increment(&mut idx, shape);
    }
    m
}

pub(crate) fn fold_matrix(m: &Matrix, shape: &[usize], mode: usize) -> Vec<f64> {
    let size: usize = shape.iter().product();
    let strides = kolda_strides(shape, mode);
    let mut out = Vec::with_capacity(size);
    let mut idx = vec![0; shape.len()];
    for _ in 0..size {
        let col: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        out.push(m[(idx[mode], col)]);
        increment(&mut idx, shape);
    }
    out
}

pub(crate) fn mode_product_values(
    shape: &[usize],
    values: &[f64],
    m: &Matrix,
    mode: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let inner = shape[mode];
    if m.ncols() != inner {
        return Err(TensorError::Dimension(format!(
            "mode-{mode} product needs a matrix with {inner} columns, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(TensorError::Dimension(
            "mode-n product matrix must have at least one row".into(),
        ));
    }
    let left: usize = shape[..mode].iter().product();
    let right: usize = shape[mode + 1..].iter().product();
    let j = m.nrows();
    let mut out = vec![0.0; left * j * right];
    for l in 0..left {
        let src = &values[l * inner * right..(l + 1) * inner * right];
        let dst = &mut out[l * j * right..(l + 1) * j * right];
        for row in 0..j {
            let d = &mut dst[row * right..(row + 1) * right];
            for i in 0..inner {
                let a = m[(row, i)];
                if a == 0.0 {
                    continue;
                }
                let s = &src[i * right..(i + 1) * right];
                for (x, y) in d.iter_mut().zip(s) {
                    *x += a * y;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[mode] = j;
    Ok((new_shape, out))
}
