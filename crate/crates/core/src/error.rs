//! Error type shared by all modules.

use crate::net::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The network failed validation; every violation is listed.
    #[error("invalid network: {}", summarize(.0))]
    InvalidNetwork(Vec<Violation>),

    /// Malformed input file. Line and column are 1-based where known.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Two inputs that must agree in shape (or in shared fields) do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The instance exceeds the size cap of an exhaustive algorithm.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// An iterative solver ran out of iterations.
    #[error("solver did not converge within {max_iterations} iterations (residual {residual:e})")]
    Convergence {
        max_iterations: usize,
        residual: f64,
    },
}

impl Error {
    /// Violations carried by an `InvalidNetwork` error, if any.
    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::InvalidNetwork(v) => v,
            _ => &[],
        }
    }
}

fn summarize(violations: &[Violation]) -> String {
    let shown: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    if violations.len() > 3 {
        format!(
            "{} (and {} more)",
            shown.join("; "),
            violations.len() - 3
        )
    } else {
        shown.join("; ")
    }
}
