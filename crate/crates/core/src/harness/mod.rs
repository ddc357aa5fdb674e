//! Experiment orchestration: configuration files, seeded training
//! campaigns, metric logs, comparison reports, plots and a grid-search
//! oracle for single-slot scenarios.

pub mod campaign;
pub mod config;
pub mod metrics;
pub mod oracle;
pub mod plots;
pub mod report;

pub use campaign::{load_run, load_runs, run_campaign, run_one, RunKey, RunRecord, RunStatus};
pub use config::{ConfigError, ExperimentConfig};
pub use metrics::EpisodeMetrics;
pub use oracle::{grid_search_oracle, OracleError, OracleOptions, OracleResult, Scenario};
pub use plots::{emit_plots, moving_average, PlotSeries};
pub use report::{compare_report, normalize, normalize_metrics, relative_improvement, ComparisonReport, Metric};
