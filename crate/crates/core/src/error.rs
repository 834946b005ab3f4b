use thiserror::Error;

/// Broad failure classes; the CLI maps each to an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Parse,
    Precondition,
    Convergence,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("spectrum outside the admissible cone: {0}")]
    Domain(String),

    #[error("point lies outside the domain (defining function = {value})")]
    OutsideDomain { value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("stencil leaves the grid at point {point}")]
    Boundary { point: usize },

    #[error("admissibility lost at {count} point(s); worst margin {worst_margin:.3e} at point {worst_point}")]
    Admissibility {
        count: usize,
        worst_point: usize,
        worst_margin: f64,
    },

    #[error("line search exhausted without keeping admissibility and reducing the residual (residual {residual:.3e})")]
    AdmissibilityStall { residual: f64 },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("continuation stalled; last accepted t = {last_t}")]
    ContinuationFailure { last_t: f64 },

    #[error("a priori bound violated by the computed solution: {0}")]
    BoundViolated(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Parse(_) | Error::Json(_) => Category::Parse,
            Error::Io(_) | Error::Csv(_) => Category::Io,
            Error::NonConvergence { .. }
            | Error::AdmissibilityStall { .. }
            | Error::LinearSolve(_)
            | Error::ContinuationFailure { .. }
            | Error::BoundViolated(_) => Category::Convergence,
            _ => Category::Precondition,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
