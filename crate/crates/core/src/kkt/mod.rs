//! Bundle subproblem data, the Newton system of the interior point method,
//! its Schur complement in `y`, and back-substitution of a full step.

mod context;
mod data;
mod reduce;

pub use context::{
    apply_full_kkt, apply_schur_h, apply_v, apply_vt, build_context, column_norms_sq, kkt_rhs, v_cols, KKTContext,
    KktRhs,
};
pub use data::{BundleMatrix, InstanceFile, IterateState, MatVecOracle, StateVecs, SubproblemData, TraceMode};
pub use reduce::{
    apply_cone_schur, complete_step, dense_reduced, dense_schur, reduce_and_backsolve, reduced_rhs, DenseYSolver,
    NewtonStep, YSolution, YSolver,
};
