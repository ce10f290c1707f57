use std::path::PathBuf;

use thiserror::Error;

/// A single problem found while validating a scenario document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted path of the offending field, e.g. `links[1].l2`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a rotation (‖RᵀR − I‖ = {deviation:.3e}, det = {det:.6})")]
    NotOrthonormal { deviation: f64, det: f64 },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("derivative order {0} not supported (max 4)")]
    DerivativeOrder(usize),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("root finding for {family} mode {mode} did not converge in bracket [{lo}, {hi}]")]
    RootFinding {
        family: &'static str,
        mode: usize,
        lo: f64,
        hi: f64,
    },

    #[error("quadrature did not converge: relative difference {rel_diff:.3e} against refined rule in {what}")]
    Quadrature { what: &'static str, rel_diff: f64 },

    #[error("singular system: condition estimate {condition:.3e}")]
    SingularSystem { condition: f64 },

    #[error("solve residual {relative:.3e} exceeds bound")]
    Residual { relative: f64 },

    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigIssue>),

    #[error("solver failure at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
