//! Result tables and CWE histograms built from run records.
//!
//! All arithmetic is done on raw counts. Percentages are rounded half up to
//! one decimal only when a cell is built, and deltas are rounded once from
//! the count difference rather than by subtracting two rounded values.

mod histogram;
mod percent;
mod render;
mod table;

use thiserror::Error;

pub use histogram::{cwe_histogram, CweBucket, CweHistogram, Phase};
pub use percent::{delta_from_counts, percent_vulnerable, reduction_delta, Percent};
pub use render::{render_ablation, render_histogram, render_table, write_artifact, ReportFormat};
pub use table::{
    build_ablation_tables, build_main_table, check_conservation, fdsp_row_label, AblationCell,
    AblationRow, AblationTable, CellResult, Column, MainTable, RowKey, TableRow,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid metric input: {0}")]
    Domain(String),
    #[error("no run records to aggregate")]
    EmptyRunSet,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
