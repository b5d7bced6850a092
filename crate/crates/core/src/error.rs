use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// The solver ran out of iterations before meeting its optimality certificate.
    #[error("weighted LASSO did not converge in {iterations} iterations (KKT residual {kkt_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
    },

    /// The estimate is too dense for the compression rate: the active density
    /// reached the compression rate and no positive debiasing coefficient exists.
    #[error("debiasing infeasible: active density {rho:.4} >= compression rate {gamma:.4}; increase the weights")]
    DebiasInfeasible { rho: f64, gamma: f64 },

    #[error("fixed-point iteration failed to converge (residual {residual:.3e})")]
    FixedPointDiverged { residual: f64 },

    #[error("objective undefined: all {0} Monte Carlo trials failed")]
    ObjectiveUndefined(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::DebiasInfeasible { .. }
                | Error::FixedPointDiverged { .. }
                | Error::ObjectiveUndefined(_)
        )
    }
}
