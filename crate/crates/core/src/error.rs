use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("mesh too coarse for layer structure: N = {n_half} but K + 1 = {required} decade subintervals need N >= {required}")]
    MeshTooCoarse { n_half: usize, required: usize },

    #[error("assembly failed on element {element}: {detail}")]
    Assembly { element: usize, detail: String },

    #[error("banded solve failed: {detail} (pivot growth {growth:.3e})")]
    Solver { detail: String, growth: f64 },

    #[error("problem `{0}` has no exact solution registered")]
    MissingExactSolution(String),

    #[error("coercivity condition violated: min (c - a'/2) = {gamma:.6e} at x = {argmin}")]
    Coercivity { gamma: f64, argmin: f64 },

    #[error("discrete functions live on different meshes or spaces")]
    MeshMismatch,

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
