//! Experiment plumbing: `key = value` configs, CSV logging and grid sweeps.

mod config;
mod run;
mod sweep;

pub use config::{parse_lines, Algorithm, ConfigBuilder, Entry, ExperimentConfig, Kind, Preset};
pub use run::{build_solver, metadata_path, run_experiment, BuiltSolver, RunRecord, RunSummary};
pub use sweep::{index_path, run_csv_path, sweep, SweepGrid, SweepOutcome};
