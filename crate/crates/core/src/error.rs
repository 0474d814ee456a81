use std::fmt;

use crate::network::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every assumption that failed for an instance, in detection order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, v) in self.violations.iter().enumerate() {
            if idx > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model assumptions violated: {0}")]
    Validation(#[from] ValidationReport),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible by the rank sufficient condition: {0}")]
    Infeasible(String),

    #[error("identification failed: numerical rank {rank} < 2 ({equations} usable equations)")]
    IdentificationFailed { rank: usize, equations: usize },

    #[error("model breakdown: {what} = {value} at node {node}, time {time}")]
    ModelBreakdown {
        what: &'static str,
        node: usize,
        time: usize,
        value: f64,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is not symmetric (discriminant {0})")]
    NotSymmetric(f64),

    #[error("search space of {size} points exceeds the guard of {limit}")]
    GuardExceeded { size: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
