use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the toolkit.
///
/// Variants split into two families: configuration/validation problems
/// (bad input, caller's fault) and numerical failures (the math did not
/// cooperate). [`DroError::is_validation`] tells them apart for exit codes.
#[derive(Debug, Error)]
pub enum DroError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data error in {path}: row {row}, column {column}: {message}")]
    Data {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty data set{}", .0.as_ref().map(|p| format!(" in {}", p.display())).unwrap_or_default())]
    EmptyData(Option<PathBuf>),

    #[error("cost matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("multiplier {lambda} is not above the threshold {threshold}: objective is +inf")]
    Infeasible { lambda: f64, threshold: f64 },

    #[error("inner problem is not concave at lambda = {lambda} (curvature threshold {threshold})")]
    NonconcaveRegime { lambda: f64, threshold: f64 },

    #[error("search interval is unbounded at lambda = {lambda}")]
    UnboundedInterval { lambda: f64 },

    #[error("loss has a kink at u = {u}: one-sided derivatives {dminus} and {dplus}")]
    Kink { u: f64, dminus: f64, dplus: f64 },

    #[error("operation requires a smooth loss, got {0}")]
    NonsmoothLoss(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl DroError {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            DroError::InvalidConfig(_)
                | DroError::Data { .. }
                | DroError::EmptyData(_)
                | DroError::NotPositiveDefinite(_)
                | DroError::Dimension { .. }
                | DroError::NonsmoothLoss(_)
                | DroError::Io { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DroError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DroError>;
