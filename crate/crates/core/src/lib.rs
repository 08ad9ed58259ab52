//! Preconditioned iterative solvers for the KKT systems of interior point
//! methods on bundle subproblems with nonnegative and semidefinite cones.
//!
//! The Newton system is reduced to a Schur complement of the form
//! `D + V V^T` (see [`kkt`]), solved with MINRES (see [`krylov`]) under a
//! low-rank Woodbury preconditioner built from either a deterministic or a
//! randomized column subspace (see [`precond`]).

// `!(x > 0.0)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod bench;
pub mod cones;
pub mod directsolve;
pub mod error;
pub mod kkt;
pub mod krylov;
pub mod instances;
pub mod ipm;
pub mod linalg;
pub mod precond;
pub mod symmat;

pub use error::{Error, Result};
