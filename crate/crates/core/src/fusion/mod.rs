//! Joint factorisation of coupled data.
//!
//! [`cmtf`] couples an order-3 tensor and a side matrix through their first
//! mode. [`parafac2`] factorises a collection of matrices that share their
//! column space but not their row count.

mod cmtf;
mod parafac2;

pub use cmtf::{cmtf, CmtfResult, CoupledData};
pub use parafac2::{parafac2, Parafac2Data, Parafac2Result};
