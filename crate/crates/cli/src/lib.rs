//! Experiment runner: TOML configs in, per-repetition CSV, summaries,
//! traces and snapshots out.

pub mod config;
pub mod run;
pub mod summary;

pub use config::{ConfigError, EnvSpec, ExperimentConfig, ScheduleGrid};
pub use run::{run_config, sweep_schedules, write_oracle, RunError, RunReport};
pub use summary::{mean_se, summarize, RepetitionSummary, ResultRow};
