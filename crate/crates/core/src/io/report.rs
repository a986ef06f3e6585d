//! Plot-ready summaries of decomposition factors.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::forms::{EfficientForm, Form};

/// Modes with at least this many indices default to a line plot.
const LINE_PLOT_MIN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Line,
    Bar,
}

/// One factor column, ready to plot against its mode's feature labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub mode: usize,
    pub mode_name: String,
    pub component: usize,
    pub features: Vec<String>,
    pub values: Vec<f64>,
    pub plot_kind: PlotKind,
    /// CPD component weight; absent for Tucker factors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub kind: String,
    pub ranks: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    pub entries: Vec<ReportEntry>,
}

/// Builds one entry per `(mode, component)` of a CPD or Tucker form.
///
/// `plot_kind` overrides the size-based default for every entry.
pub fn emit_report(form: &Form, rel_error: Option<f64>, plot_kind: Option<PlotKind>) -> Result<ReportBundle> {
    let (factors, weights, ranks) = match form {
        Form::Cpd(c) => (c.factors(), Some(c.weights()), vec![c.rank()]),
        Form::Tkd(t) => (t.factors(), None, t.ranks().to_vec()),
        Form::Tt(_) => {
            return Err(TensorError::Argument(
                "reports need CPD or Tucker factors; TT cores have no per-mode components".into(),
            ))
        }
    };
    let mut entries = Vec::new();
    for (n, (f, mode)) in factors.iter().zip(form.modes()).enumerate() {
        let features = mode
            .features
            .clone()
            .unwrap_or_else(|| (0..f.nrows()).map(|i| i.to_string()).collect());
        let kind = plot_kind.unwrap_or(if f.nrows() >= LINE_PLOT_MIN {
            PlotKind::Line
        } else {
            PlotKind::Bar
        });
        for r in 0..f.ncols() {
            entries.push(ReportEntry {
                mode: n,
                mode_name: mode.name.clone(),
                component: r,
                features: features.clone(),
                values: f.column(r).iter().copied().collect(),
                plot_kind: kind,
                weight: weights.map(|w| w[r]),
            });
        }
    }
    Ok(ReportBundle {
        kind: form.kind().to_string(),
        ranks,
        rel_error,
        entries,
    })
}
