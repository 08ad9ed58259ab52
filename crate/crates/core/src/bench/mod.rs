//! Benchmark harness: traces of Newton systems, replay with the direct and
//! the three MINRES variants, and box-plot statistics.

mod replay;
mod stats;
mod trace_io;

pub use crate::instances::{gen_maxcut_like, gen_random, RandomParams};
pub use replay::{cond_estimate, replay, MinresYSolver, ReplayConfig, RunRecord, SolverKind};
pub use stats::{
    box_stats, bundle_group, emit_csv, mu_group, quantile, read_records, records_to_csv, summarize, write_records,
    Grouping, Metric, QuartileSummary, BUNDLE_GROUPS, MU_GROUPS,
};
pub use trace_io::{load_trace, save_trace, snapshot_file, trace_instance, Manifest, Trace, INSTANCE_FILE, MANIFEST_FILE};
