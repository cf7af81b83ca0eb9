use nalgebra::{Complex, DMatrix};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("{what} is not symmetric positive semidefinite: {detail}")]
    NotPsd { what: String, detail: String },

    #[error("{what} is not Schur stable (spectral radius {radius:.6})")]
    NotSchur { what: String, radius: f64 },

    /// Fixed-point iteration hit its cap; the last iterate is kept for inspection.
    #[error("Riccati iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence {
        iterations: usize,
        last_step: f64,
        last_iterate: Box<DMatrix<f64>>,
    },

    #[error("{0} is singular")]
    Singular(String),

    #[error("evaluation point {z} is a pole: it coincides with an eigenvalue of the state matrix")]
    Pole { z: Complex<f64> },

    #[error("no null direction: {0}")]
    NoNullDirection(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub(crate) fn shape(m: &DMatrix<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}
