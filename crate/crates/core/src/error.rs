use thiserror::Error;

/// Errors raised by the KKT assembly, preconditioning and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix {name} is not positive definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPositiveDefinite {
        name: &'static str,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("second-order cone blocks are not supported")]
    UnsupportedSoc,

    #[error("point is not strictly interior: {0}")]
    NotInterior(String),

    #[error("infeasible data: {0}")]
    Infeasible(String),

    #[error("singular factorization at pivot {pivot} (|a_kk| = {diag:e}, column max = {colmax:e})")]
    Singular { pivot: usize, diag: f64, colmax: f64 },

    #[error("dense system of order {order} exceeds the size cap {cap}")]
    TooLarge { order: usize, cap: usize },

    #[error("iterative solver failed: {0}")]
    Solver(String),

    #[error("interior point step collapsed at iteration {iter}: step {step:e} (mu = {mu:e})")]
    StepCollapse { iter: usize, step: f64, mu: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
