use std::path::Path;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Reads numeric cells row by row, left to right, into a row-major tensor.
///
/// Rows may have different lengths; only the total cell count must equal the
/// product of `shape`.
pub fn import_csv(path: impl AsRef<Path>, shape: &[usize]) -> Result<Tensor> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| TensorError::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, shape)
}

/// [`import_csv`] over any reader.
pub fn read_csv(reader: impl std::io::Read, shape: &[usize]) -> Result<Tensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(TensorError::Argument(format!("invalid shape {shape:?}")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| TensorError::Format(format!("row {}: {e}", row + 1)))?;
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                TensorError::Format(format!(
                    "row {}, column {}: cannot parse `{cell}` as a number",
                    row + 1,
                    col + 1
                ))
            })?;
            values.push(v);
        }
    }
    let expected: usize = shape.iter().product();
    if values.len() != expected {
        return Err(TensorError::Format(format!(
            "expected {expected} cells, found {}",
            values.len()
        )));
    }
    Tensor::new(shape.to_vec(), values)
}
