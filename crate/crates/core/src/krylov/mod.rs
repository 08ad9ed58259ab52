//! Preconditioned MINRES and a Lanczos condition-number estimate.

mod lanczos;
mod minres;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use lanczos::{lanczos_cond_estimate, lanczos_ritz_values, LANCZOS_SEED};
pub use minres::{minres, MinresConfig};

/// A symmetric linear map on `R^N`, given only through products.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    pub n: usize,
    pub f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    pub fn new(n: usize, f: F) -> Self {
        FnOperator { n, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        (self.f)(v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(v.clone())
    }
}

impl LinearOperator for nalgebra::DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        crate::error::check_len("dense operator", self.ncols(), v.len())?;
        Ok(self * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Converged,
    Maxit,
    Breakdown,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "CONVERGED",
            SolveStatus::Maxit => "MAXIT",
            SolveStatus::Breakdown => "BREAKDOWN",
        }
    }
}

/// Measurements of one iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Operator applications, including the final true-residual check.
    pub matvecs: usize,
    /// Final residual in the preconditioner norm, relative to the initial one.
    pub precond_residual: f64,
    /// `||A x - b|| / ||b||`.
    pub true_residual: f64,
    pub cond_estimate: Option<f64>,
    pub precond_columns: usize,
    pub wall_seconds: f64,
    /// Relative tolerance after the safeguard factor was applied.
    pub effective_tol: f64,
    /// Preconditioner-norm residual after each iteration (relative).
    pub history: Vec<f64>,
}
