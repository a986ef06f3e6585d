//! The `.htb` container: one self-describing JSON document per value.
//!
//! Every document carries `format_version` ("1") and `kind`. Numeric arrays
//! are flat and row-major; matrices are `{rows, cols, data}`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::json::to_canonical_string;
use crate::decomp::FitOptions;
use crate::error::{Result, TensorError};
use crate::forms::{EfficientForm, Form, TensorCPD, TensorTKD, TensorTT};
use crate::gaussian::TensorNormal;
use crate::learning::{DecompositionSpec, LsSvm, LsstmModel, SlotLearner, TelModel, Vote};
use crate::tensor::{Mode, StateRecord, Tensor};
use crate::Matrix;

pub const FORMAT_VERSION: &str = "1";

/// Anything an `.htb` file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum HtbValue {
    Tensor(Tensor),
    Cpd(TensorCPD),
    Tkd(TensorTKD),
    Tt(TensorTT),
    TensorNormal(TensorNormal),
    Lsstm(LsstmModel),
    Tel(TelModel<LsSvm>),
}

impl HtbValue {
    pub fn kind(&self) -> &'static str {
        match self {
            HtbValue::Tensor(_) => "tensor",
            HtbValue::Cpd(_) => "cpd",
            HtbValue::Tkd(_) => "tkd",
            HtbValue::Tt(_) => "tt",
            HtbValue::TensorNormal(_) => "tensor_normal",
            HtbValue::Lsstm(_) => "lsstm",
            HtbValue::Tel(_) => "tel",
        }
    }
}

impl From<Form> for HtbValue {
    fn from(f: Form) -> Self {
        match f {
            Form::Cpd(c) => HtbValue::Cpd(c),
            Form::Tkd(t) => HtbValue::Tkd(t),
            Form::Tt(t) => HtbValue::Tt(t),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixDoc {
    fn from_matrix(m: &Matrix) -> Self {
        MatrixDoc {
            rows: m.nrows(),
            cols: m.ncols(),
            data: crate::ops::to_row_major(m),
        }
    }

    fn to_matrix(&self, field: &str) -> Result<Matrix> {
        if self.rows * self.cols != self.data.len() {
            return Err(TensorError::validation(
                field,
                format!(
                    "{}x{} matrix needs {} values, found {}",
                    self.rows,
                    self.cols,
                    self.rows * self.cols,
                    self.data.len()
                ),
            ));
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayDoc {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl ArrayDoc {
    fn from_tensor(t: &Tensor) -> Self {
        ArrayDoc {
            shape: t.shape().to_vec(),
            data: t.values().to_vec(),
        }
    }

    fn to_tensor(&self, field: &str) -> Result<Tensor> {
        check_len(field, &self.shape, self.data.len())?;
        Tensor::new(self.shape.clone(), self.data.clone()).map_err(|e| as_validation(field, e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    modes: Vec<Mode>,
    #[serde(default)]
    state: Vec<StateRecord>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CpdDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    modes: Vec<Mode>,
    rank: usize,
    weights: Vec<f64>,
    factors: Vec<MatrixDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TkdDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    modes: Vec<Mode>,
    ranks: Vec<usize>,
    core: ArrayDoc,
    factors: Vec<MatrixDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TtDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    modes: Vec<Mode>,
    ranks: Vec<usize>,
    cores: Vec<ArrayDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorNormalDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    modes: Vec<Mode>,
    mean: Vec<f64>,
    factors: Vec<MatrixDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LsstmDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    mode_vectors: Vec<Vec<f64>>,
    bias: f64,
    c: f64,
    #[serde(default)]
    objective_trace: Vec<f64>,
    #[serde(default)]
    converged: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelLearnerDoc {
    mode: usize,
    component: usize,
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelDoc {
    format_version: String,
    kind: String,
    shape: Vec<usize>,
    spec: DecompositionSpec,
    vote: Vote,
    options: FitOptions,
    learners: Vec<TelLearnerDoc>,
}

fn as_validation(field: &str, e: TensorError) -> TensorError {
    match e {
        v @ TensorError::Validation { .. } => v,
        other => TensorError::validation(field, other.to_string()),
    }
}

fn check_len(field: &str, shape: &[usize], found: usize) -> Result<()> {
    let want: usize = shape.iter().product();
    if shape.is_empty() || want != found {
        return Err(TensorError::validation(
            field,
            format!("shape {shape:?} needs {want} values, found {found}"),
        ));
    }
    Ok(())
}

fn check_shape(field: &str, declared: &[usize], actual: &[usize]) -> Result<()> {
    if declared != actual {
        return Err(TensorError::validation(
            field,
            format!("declared {declared:?} but the content implies {actual:?}"),
        ));
    }
    Ok(())
}

fn check_finite<'a>(field: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(TensorError::validation(field, "values must be finite"));
    }
    Ok(())
}

fn header(kind: &str) -> (String, String) {
    (FORMAT_VERSION.to_string(), kind.to_string())
}

/// Canonical document text for `value`.
pub fn to_htb_string(value: &HtbValue) -> Result<String> {
    let (format_version, kind) = header(value.kind());
    match value {
        HtbValue::Tensor(t) => {
            check_finite("data", t.values())?;
            to_canonical_string(&TensorDoc {
                format_version,
                kind,
                shape: t.shape().to_vec(),
                modes: t.modes().to_vec(),
                state: t.state().to_vec(),
                data: t.values().to_vec(),
            })
        }
        HtbValue::Cpd(c) => {
            check_finite("weights", c.weights())?;
            check_finite("factors", c.factors().iter().flat_map(|f| f.iter()))?;
            to_canonical_string(&CpdDoc {
                format_version,
                kind,
                shape: c.full_shape(),
                modes: c.modes().to_vec(),
                rank: c.rank(),
                weights: c.weights().to_vec(),
                factors: c.factors().iter().map(MatrixDoc::from_matrix).collect(),
            })
        }
        HtbValue::Tkd(t) => {
            check_finite("core", t.core().values())?;
            check_finite("factors", t.factors().iter().flat_map(|f| f.iter()))?;
            to_canonical_string(&TkdDoc {
                format_version,
                kind,
                shape: t.full_shape(),
                modes: t.modes().to_vec(),
                ranks: t.ranks().to_vec(),
                core: ArrayDoc::from_tensor(t.core()),
                factors: t.factors().iter().map(MatrixDoc::from_matrix).collect(),
            })
        }
        HtbValue::Tt(t) => {
            check_finite("cores", t.cores().iter().flat_map(|c| c.values()))?;
            to_canonical_string(&TtDoc {
                format_version,
                kind,
                shape: t.full_shape(),
                modes: t.modes().to_vec(),
                ranks: t.ranks(),
                cores: t.cores().iter().map(ArrayDoc::from_tensor).collect(),
            })
        }
        HtbValue::TensorNormal(m) => {
            check_finite("mean", m.mean().values())?;
            to_canonical_string(&TensorNormalDoc {
                format_version,
                kind,
                shape: m.shape().to_vec(),
                modes: m.mean().modes().to_vec(),
                mean: m.mean().values().to_vec(),
                factors: m.factors().iter().map(MatrixDoc::from_matrix).collect(),
            })
        }
        HtbValue::Lsstm(m) => {
            m.validate()?;
            to_canonical_string(&LsstmDoc {
                format_version,
                kind,
                shape: m.shape(),
                mode_vectors: m.mode_vectors.clone(),
                bias: m.bias,
                c: m.c,
                objective_trace: m.objective_trace.clone(),
                converged: m.converged,
            })
        }
        HtbValue::Tel(m) => {
            for l in &m.learners {
                check_finite("learners", l.learner.weights.iter().chain([&l.learner.bias]))?;
            }
            to_canonical_string(&TelDoc {
                format_version,
                kind,
                shape: m.shape.clone(),
                spec: m.spec.clone(),
                vote: m.vote,
                options: m.options,
                learners: m
                    .learners
                    .iter()
                    .map(|l| TelLearnerDoc {
                        mode: l.mode,
                        component: l.component,
                        weights: l.learner.weights.clone(),
                        bias: l.learner.bias,
                    })
                    .collect(),
            })
        }
    }
}

/// Typed deserialisation; a failure names the offending field path.
fn typed<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "document".to_string() } else { path };
        TensorError::validation(field, e.into_inner().to_string())
    })
}

fn tensor_from(d: TensorDoc) -> Result<Tensor> {
    check_len("data", &d.shape, d.data.len())?;
    let t = Tensor::from_parts(d.shape, d.data, d.modes, d.state).map_err(|e| as_validation("shape", e))?;
    if !t.state_is_consistent() {
        return Err(TensorError::validation(
            "state",
            "state records do not chain from the original shape to the stored shape",
        ));
    }
    Ok(t)
}

fn cpd_from(d: CpdDoc) -> Result<TensorCPD> {
    if d.weights.len() != d.rank {
        return Err(TensorError::validation(
            "weights",
            format!("{} weights for rank {}", d.weights.len(), d.rank),
        ));
    }
    if d.factors.len() != d.shape.len() {
        return Err(TensorError::validation(
            "factors",
            format!("{} factors for an order-{} shape", d.factors.len(), d.shape.len()),
        ));
    }
    let mut factors = Vec::with_capacity(d.factors.len());
    for (n, (f, &dim)) in d.factors.iter().zip(&d.shape).enumerate() {
        if f.rows != dim || f.cols != d.rank {
            return Err(TensorError::validation(
                "factors",
                format!(
                    "factor {n} is {}x{}, expected {dim}x{}",
                    f.rows, f.cols, d.rank
                ),
            ));
        }
        factors.push(f.to_matrix("factors")?);
    }
    TensorCPD::new(d.weights, factors, Some(d.modes)).map_err(|e| as_validation("factors", e))
}

fn tkd_from(d: TkdDoc) -> Result<TensorTKD> {
    let core = d.core.to_tensor("core")?;
    let factors = d
        .factors
        .iter()
        .map(|f| f.to_matrix("factors"))
        .collect::<Result<Vec<_>>>()?;
    let t = TensorTKD::new(core, factors, Some(d.modes)).map_err(|e| as_validation("factors", e))?;
    check_shape("shape", &d.shape, &t.full_shape())?;
    check_shape("ranks", &d.ranks, t.ranks())?;
    Ok(t)
}

fn tt_from(d: TtDoc) -> Result<TensorTT> {
    let cores = d
        .cores
        .iter()
        .map(|c| c.to_tensor("cores"))
        .collect::<Result<Vec<_>>>()?;
    let t = TensorTT::new(cores, Some(d.modes)).map_err(|e| as_validation("cores", e))?;
    check_shape("shape", &d.shape, &t.full_shape())?;
    check_shape("ranks", &d.ranks, &t.ranks())?;
    Ok(t)
}

fn tensor_normal_from(d: TensorNormalDoc) -> Result<TensorNormal> {
    check_len("mean", &d.shape, d.mean.len())?;
    let mean = Tensor::from_parts(d.shape, d.mean, d.modes, Vec::new()).map_err(|e| as_validation("mean", e))?;
    let factors = d
        .factors
        .iter()
        .map(|f| f.to_matrix("factors"))
        .collect::<Result<Vec<_>>>()?;
    TensorNormal::new(mean, factors).map_err(|e| as_validation("factors", e))
}

fn lsstm_from(d: LsstmDoc) -> Result<LsstmModel> {
    let m = LsstmModel {
        mode_vectors: d.mode_vectors,
        bias: d.bias,
        c: d.c,
        objective_trace: d.objective_trace,
        converged: d.converged,
    };
    m.validate()?;
    check_shape("shape", &d.shape, &m.shape())?;
    Ok(m)
}

fn tel_from(d: TelDoc) -> Result<TelModel<LsSvm>> {
    if d.shape.is_empty() || d.shape.contains(&0) {
        return Err(TensorError::validation("shape", "entries must all be >= 1"));
    }
    d.options
        .validate()
        .map_err(|e| as_validation("options", e))?;
    d.spec
        .validate(&d.shape)
        .map_err(|e| as_validation("spec", e))?;
    let slots: Vec<(usize, usize)> = match &d.spec {
        DecompositionSpec::Cpd { rank } => (0..d.shape.len())
            .flat_map(|n| (0..*rank).map(move |r| (n, r)))
            .collect(),
        DecompositionSpec::Tkd { ranks } => ranks
            .iter()
            .enumerate()
            .flat_map(|(n, &r)| (0..r).map(move |c| (n, c)))
            .collect(),
    };
    if slots.len() != d.learners.len() {
        return Err(TensorError::validation(
            "learners",
            format!("{} learners, the spec implies {}", d.learners.len(), slots.len()),
        ));
    }
    let mut learners = Vec::with_capacity(slots.len());
    for (l, (n, r)) in d.learners.into_iter().zip(slots) {
        if (l.mode, l.component) != (n, r) {
            return Err(TensorError::validation(
                "learners",
                format!(
                    "expected slot (mode {n}, component {r}), found (mode {}, component {})",
                    l.mode, l.component
                ),
            ));
        }
        let expected = d.shape[n];
        if l.weights.len() != expected {
            return Err(TensorError::validation(
                "learners",
                format!(
                    "learner for mode {n} has {} weights, mode size is {expected}",
                    l.weights.len()
                ),
            ));
        }
        learners.push(SlotLearner {
            mode: l.mode,
            component: l.component,
            learner: LsSvm {
                weights: l.weights,
                bias: l.bias,
            },
        });
    }
    Ok(TelModel {
        spec: d.spec,
        learners,
        vote: d.vote,
        shape: d.shape,
        options: d.options,
    })
}

/// Parses a document. Syntax errors are format errors with line and column;
/// a wrong `format_version` is a version error; anything structurally wrong
/// is a validation error naming the field.
pub fn from_htb_str(text: &str) -> Result<HtbValue> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        TensorError::Format(format!("line {}, column {}: {e}", e.line(), e.column()))
    })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| TensorError::validation("document", "top level must be a JSON object"))?;
    match obj.get("format_version") {
        Some(Value::String(v)) if v == FORMAT_VERSION => {}
        Some(other) => return Err(TensorError::Version(other.to_string())),
        None => return Err(TensorError::validation("format_version", "missing")),
    }
    let kind = match obj.get("kind") {
        Some(Value::String(k)) => k.clone(),
        _ => return Err(TensorError::validation("kind", "missing or not a string")),
    };
    Ok(match kind.as_str() {
        "tensor" => HtbValue::Tensor(tensor_from(typed(doc)?)?),
        "cpd" => HtbValue::Cpd(cpd_from(typed(doc)?)?),
        "tkd" => HtbValue::Tkd(tkd_from(typed(doc)?)?),
        "tt" => HtbValue::Tt(tt_from(typed(doc)?)?),
        "tensor_normal" => HtbValue::TensorNormal(tensor_normal_from(typed(doc)?)?),
        "lsstm" => HtbValue::Lsstm(lsstm_from(typed(doc)?)?),
        "tel" => HtbValue::Tel(tel_from(typed(doc)?)?),
        other => {
            return Err(TensorError::validation(
                "kind",
                format!("unknown kind `{other}`"),
            ))
        }
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<HtbValue> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TensorError::Io(format!("{}: {e}", path.display())))?;
    from_htb_str(&text)
}

pub fn save(value: &HtbValue, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_htb_string(value)?;
    fs::write(path, text).map_err(|e| TensorError::Io(format!("{}: {e}", path.display())))
}

fn wrong_kind(expected: &str, found: &HtbValue) -> TensorError {
    TensorError::validation(
        "kind",
        format!("expected {expected}, found `{}`", found.kind()),
    )
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    match load(path)? {
        HtbValue::Tensor(t) => Ok(t),
        other => Err(wrong_kind("`tensor`", &other)),
    }
}

/// Loads a `cpd`, `tkd` or `tt` document.
pub fn load_form(path: impl AsRef<Path>) -> Result<Form> {
    match load(path)? {
        HtbValue::Cpd(c) => Ok(Form::Cpd(c)),
        HtbValue::Tkd(t) => Ok(Form::Tkd(t)),
        HtbValue::Tt(t) => Ok(Form::Tt(t)),
        other => Err(wrong_kind("`cpd`, `tkd` or `tt`", &other)),
    }
}
