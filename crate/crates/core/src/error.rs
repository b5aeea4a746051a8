//! Crate error types.

use thiserror::Error;

/// Errors produced by the modeling, estimation and data-generation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("forecasting problem for day {day} is structurally infeasible at hour {hour}: \
             lower power bound {lower:.6} kW exceeds total block capacity {capacity:.6} kW")]
    InfeasibleDay {
        day: usize,
        hour: usize,
        lower: f64,
        capacity: f64,
    },

    #[error("estimation stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the estimation stage it occurred in.
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

/// Errors produced by the LP engine itself. Infeasible and unbounded models
/// are *statuses*, not errors; these are reserved for malformed input and
/// resource exhaustion.
#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),

    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}
