//! Low-rank preconditioners for `D + VV'` and dense reference bounds.

pub mod bounds;
mod deterministic;
mod random;
mod woodbury;

pub use deterministic::{
    append_nonneg_columns, append_psd_columns, deterministic_subspace, selection_threshold, ColumnSet,
    DeterministicConfig, RowColumnScaling,
};
pub use random::{
    extension_size, initial_sketch_size, random_subspace, retained_count, SelectionState, EIG_FLOOR, ORTH_DROP_TOL,
};
pub use woodbury::{precond_apply, precond_setup, termination_factor, LowRankPrecond};
