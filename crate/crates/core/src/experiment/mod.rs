//! Configuration-driven runs, sweeps and reports.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, Mode, SystemKind};
pub use report::{emit_report, Format};
pub use run::{generate_truth, run_experiment, run_on_truth, RunOutput, RunSummary};
pub use sweep::{aggregate, quantile_sorted, run_sweep, CellResult, GroupStats, SweepAxes, SweepGrid, SweepReport};
