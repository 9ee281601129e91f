//! Experiment runner for `riswpt-core`: seeded parameter sweeps, result
//! files and the configuration schema shared with the `riswpt` binary.

pub mod config;
pub mod output;
pub mod sweep;

pub use output::{emit_results, read_results, Format};
pub use sweep::{run_point, run_sweep, run_sweep_detailed, ResultRow, RisMode, RunRecord, SweepKind, SweepSpec};
