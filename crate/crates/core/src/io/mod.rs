//! File formats: `.htb` JSON documents, CSV import and factor reports.

mod csv_import;
mod htb;
pub mod json;
mod report;

pub use csv_import::{import_csv, read_csv};
pub use htb::{from_htb_str, load, load_form, load_tensor, save, to_htb_string, HtbValue, FORMAT_VERSION};
pub use report::{emit_report, PlotKind, ReportBundle, ReportEntry};
