//! Evaluation statistics and the command-line front end.

mod cli;
mod manifest;
mod report;
mod stats;

pub use cli::{cli_dispatch, EXIT_DATA, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};
pub use manifest::{RunManifest, StageTiming};
pub use report::{evaluate_population, report_from_rows, EvaluationReport, PropertySummary, SampleRow, PROPERTY_COLUMNS};
pub use stats::{normalized_rmse, pearson_correlation, quantile, QuantileSummary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("length mismatch: {x} vs {y} (need equal lengths of at least 2)")]
    LengthMismatch { x: usize, y: usize },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
