//! Monte Carlo experiment runner: config, trajectories, aggregation, output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, InitKind, ProblemSource, ProcessChoice};
pub use output::{emit_csv, emit_plot_data, emit_summary, parse_csv, read_csv};
pub use run::{run_experiment, AggregateResult, Experiment};
