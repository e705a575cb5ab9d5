use thiserror::Error;

use crate::network::SolveTrace;

pub type Result<T> = std::result::Result<T, Error>;

/// Error category, used by front ends to map failures onto exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Solver,
    Reduction,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate {dim} of point {point} is {value}, outside [-1, 1]")]
    Domain {
        point: usize,
        dim: usize,
        value: f64,
    },

    #[error("requested {requested} quadrature points exceeds the cap of {cap}")]
    ResourceCap { requested: usize, cap: usize },

    #[error("matrix is numerically singular")]
    SingularMatrix,

    #[error("monomial column {column} is numerically dependent (diagonal {diagonal:e})")]
    RankDeficient { column: usize, diagonal: f64 },

    #[error("linear program is infeasible (phase-one objective {objective:e})")]
    LpInfeasible { objective: f64 },

    #[error("simplex iteration limit reached after {iterations} pivots")]
    LpIterationLimit { iterations: usize },

    #[error("basic solution residual {residual:e} exceeds the feasibility tolerance")]
    LpInaccurate { residual: f64 },

    #[error("modified quadrature orthogonality error {error:e} exceeds {threshold:e}")]
    Orthogonality { error: f64, threshold: f64 },

    #[error("component solve failed: {0}")]
    ComponentSolve(String),

    #[error("component {component} failed{}: {reason}", point.map(|p| format!(" at quadrature point {p}")).unwrap_or_default())]
    ComponentFailure {
        component: usize,
        point: Option<usize>,
        reason: String,
    },

    #[error("{solver} did not converge after {} iterations (last residual {:e})", trace.iterations, trace.last_residual())]
    NonConvergence {
        solver: &'static str,
        trace: Box<SolveTrace>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Domain { .. } | Error::ResourceCap { .. } => {
                ErrorKind::Argument
            }
            Error::RankDeficient { .. }
            | Error::LpInfeasible { .. }
            | Error::LpIterationLimit { .. }
            | Error::LpInaccurate { .. }
            | Error::Orthogonality { .. } => ErrorKind::Reduction,
            Error::SingularMatrix
            | Error::ComponentSolve(_)
            | Error::ComponentFailure { .. }
            | Error::NonConvergence { .. } => ErrorKind::Solver,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Tags a bare component error with the component index and quadrature point.
    pub(crate) fn in_component(self, component: usize, point: Option<usize>) -> Self {
        match self {
            Error::ComponentSolve(reason) => Error::ComponentFailure {
                component,
                point,
                reason,
            },
            Error::ComponentFailure { reason, .. } => Error::ComponentFailure {
                component,
                point,
                reason,
            },
            other => Error::ComponentFailure {
                component,
                point,
                reason: other.to_string(),
            },
        }
    }
}
