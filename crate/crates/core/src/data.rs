//! Panels of time series: CSV ingestion and export, FRED transform codes,
//! design construction for local projections, and principal components.

pub mod design;
pub mod panel;
pub mod pca;
pub mod period;
pub mod transform;

pub use design::{build_design, Design};
pub use panel::{format_number, load_csv, parse_csv, to_csv_string, write_csv, LoadOptions, TimeSeriesPanel};
pub use pca::{factor_structure_report, pca, FactorCurve, PCAResult, PcaScaling};
pub use period::Period;
pub use transform::{apply_tcodes, invert_series, transform_series, undo_tcodes};
