//! Experiment harness: scheme runs, metrics files, comparisons and timing.

pub mod config;
pub mod metrics;
pub mod run;
pub mod scheme;
pub mod timing;

pub use config::{load_config, RunConfig, TimingConfig, CONFIG_ECHO};
pub use metrics::{emit_csv, write_csv, MetricsRow, Phase, METRICS_HEADER, METRICS_SCHEMA_VERSION};
pub use run::{compare_schemes, eval_rows, run_all, run_scheme, summarize, Comparison, SchemeRun, SchemeSummary};
pub use scheme::SchemeId;
pub use timing::{time_decisions, LatencyStats, MachineInfo, TimingReport, TimingRow};
