use std::path::PathBuf;

use thiserror::Error;

use crate::solver::Trajectory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in `{field}`")]
    NonFinite { field: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("boundary condition violated: {0}")]
    BoundaryCondition(String),

    #[error("pinch bound violated at cell {cell}: density {value} outside [{lower}, {upper}]")]
    PinchViolation {
        cell: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("{what} = {value} outside admissible range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("time step underflow at tau = {tau}: density stayed non-positive after {halvings} halvings")]
    StepUnderflow {
        tau: f64,
        halvings: u32,
        partial: Box<Trajectory>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("{}", match line { Some(l) => format!("config line {l}: {message}"), None => format!("config: {message}") })]
    Config { line: Option<usize>, message: String },

    #[error("artifact `{}`: {message}", path.display())]
    Artifact { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: field.to_string(),
        })
    }
}
