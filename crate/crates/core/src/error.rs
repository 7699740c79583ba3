use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian: max |M - M*| = {deviation:e} exceeds {allowed:e}")]
    Symmetry { deviation: f64, allowed: f64 },

    #[error("eigensolver stalled at index {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("eigenpair {index} residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { index: usize, residual: f64, tol: f64 },

    #[error("singular matrix: pivot {pivot} has magnitude {magnitude:e}")]
    Singular { pivot: usize, magnitude: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("quadrature did not converge with {nodes} nodes: last estimates {previous:e} and {last:e}")]
    Accuracy { previous: f64, last: f64, nodes: usize },

    #[error("spectral parameter lies on the retained Landau level q = {level}")]
    Pole { level: usize },

    #[error("function vanishes on the contour (min |f| = {min_abs:e}, max |f| = {max_abs:e})")]
    ContourThroughZero { min_abs: f64, max_abs: f64, at: Complex64 },

    #[error("winding number did not stabilise with {nodes} nodes (last total {winding})")]
    Resolution { nodes: usize, winding: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("[{module}] {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_module(self, module: &'static str) -> Self {
        Error::Module {
            module,
            source: Box::new(self),
        }
    }
}
