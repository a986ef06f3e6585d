//! Multilinear algebra toolkit.
//!
//! Dense tensors that carry mode metadata, the Kruskal / Tucker / Tensor-Train
//! efficient forms, CPD/HOSVD/HOOI/TT decompositions, coupled factorisations,
//! tensor classifiers, Kronecker-separable tensor Gaussians and a JSON file
//! format driven by the `tensorkit` command-line tool.

pub mod cli;
pub mod decomp;
pub mod error;
pub mod forms;
pub mod gaussian;
pub mod io;
pub mod fusion;
pub mod learning;
pub mod linalg;
pub mod ops;
pub mod tensor;

pub use error::{Result, TensorError};
pub use forms::{cpd_to_tkd, rel_error, EfficientForm, Form, TensorCPD, TensorTKD, TensorTT};
pub use tensor::{Mode, StateKind, StateRecord, Tensor};

/// Dense `f64` matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
