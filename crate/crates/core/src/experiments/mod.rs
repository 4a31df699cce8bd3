//! Desk-scale experiment drivers.

use std::path::Path;

use serde::Serialize;

use crate::error::{DroError, Result};

pub mod portfolio;
pub mod reference;
pub mod supervised;
pub mod synthetic;
pub mod trace;

pub use portfolio::{run_portfolio_frontier, CostKind, FrontierConfig, FrontierPoint};
pub use reference::{reference_minimum, ReferenceRegion};
pub use supervised::{run_supervised_experiment, train_dro, DroRun, GapRow, SupervisedConfig, SupervisedOutcome};
pub use trace::{run_worstcase_trace, TraceOutcome};

/// Writes serde rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| DroError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> DroError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => DroError::io(path, source),
            other => DroError::Serialize(format!("{other:?}")),
        }
    } else {
        DroError::Serialize(e.to_string())
    }
}
