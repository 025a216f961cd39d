//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use cmaxpp::agents::{AgentKind, AlphaSchedule, LargeConfig};
use cmaxpp::envs::LatticeParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    Lift {
        #[serde(default = "default_lift_size")]
        columns: usize,
        #[serde(default = "default_lift_size")]
        heights: usize,
    },
    Bottleneck {
        #[serde(default = "default_bottleneck")]
        size: usize,
    },
    RandomGrid {
        width: usize,
        height: usize,
        #[serde(default = "default_density")]
        density: f64,
    },
    /// An ASCII map; the same instance for every seed.
    Ascii {
        map: String,
        #[serde(default)]
        optimistic: bool,
    },
    Lattice {
        #[serde(default)]
        paper_scale: bool,
        /// Overrides the desk-scale (or paper-scale) defaults.
        #[serde(default)]
        params: Option<LatticeParams>,
        /// Directory for cached primitive tables.
        #[serde(default)]
        primitive_cache: Option<PathBuf>,
    },
}

fn default_lift_size() -> usize {
    10
}

fn default_bottleneck() -> usize {
    12
}

fn default_density() -> f64 {
    0.25
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Lift { .. } => "lift",
            EnvSpec::Bottleneck { .. } => "bottleneck",
            EnvSpec::RandomGrid { .. } => "random-grid",
            EnvSpec::Ascii { .. } => "ascii",
            EnvSpec::Lattice { .. } => "lattice",
        }
    }

    pub fn lattice_params(&self) -> Option<LatticeParams> {
        match self {
            EnvSpec::Lattice {
                paper_scale,
                params,
                ..
            } => Some(params.clone().unwrap_or_else(|| {
                if *paper_scale {
                    LatticeParams::paper_scale()
                } else {
                    LatticeParams::default()
                }
            })),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approximator {
    #[default]
    Tabular,
    /// Linear residual approximators with hypersphere incorrect sets.
    Linear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialValues {
    /// Optimal cost-to-goal under the model.
    #[default]
    Model,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub env: EnvSpec,
    pub agent: AgentKind,
    #[serde(default)]
    pub approximator: Approximator,
    /// Expansion budget K.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_step_cap")]
    pub step_cap: usize,
    #[serde(default)]
    pub continue_after_failure: bool,
    #[serde(default = "default_schedule")]
    pub schedule: AlphaSchedule,
    pub seeds: Vec<u64>,
    /// Every instance draws from its own stream of this master seed.
    #[serde(default)]
    pub master_seed: u64,
    /// Replaces the default `|S|` penalty on known-incorrect transitions.
    #[serde(default)]
    pub penalty: Option<f64>,
    #[serde(default)]
    pub initial_values: InitialValues,
    /// Settings for the linear approximator mode. `budget` above wins over
    /// the budget inside this table.
    #[serde(default)]
    pub large: LargeConfig,
    /// Write one JSON line per executed step.
    #[serde(default)]
    pub trace: bool,
    /// Write the final agent state per seed.
    #[serde(default)]
    pub snapshots: bool,
    /// Record wall-clock time per repetition. Off keeps the CSV reproducible.
    #[serde(default)]
    pub wall_time: bool,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub threads: usize,
}

fn default_budget() -> usize {
    5
}

fn default_repetitions() -> usize {
    20
}

fn default_step_cap() -> usize {
    500
}

fn default_schedule() -> AlphaSchedule {
    AlphaSchedule::constant(1.0)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.budget == 0 {
            return Err(invalid("budget", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        if self.step_cap == 0 {
            return Err(invalid("step_cap", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("seeds", "must be distinct"));
        }
        if let Some(p) = self.penalty {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid("penalty", "must be finite and positive"));
            }
        }
        self.schedule
            .validate()
            .map_err(|e| invalid("schedule", e.to_string()))?;
        if self.approximator == Approximator::Linear {
            if self.agent != AgentKind::Cmaxpp {
                return Err(invalid(
                    "approximator",
                    "the linear mode only supports the cmaxpp agent",
                ));
            }
            let l = &self.large;
            if l.batch == 0 {
                return Err(invalid("large.batch", "must be at least 1"));
            }
            if !(l.learning_rate > 0.0) {
                return Err(invalid("large.learning_rate", "must be positive"));
            }
            if !(l.tau > 0.0 && l.tau <= 1.0) {
                return Err(invalid("large.tau", "must lie in (0, 1]"));
            }
            if !(l.delta >= 0.0 && l.xi >= 0.0) {
                return Err(invalid("large", "delta and xi must be nonnegative"));
            }
        }
        match &self.env {
            EnvSpec::RandomGrid { density, .. } if !(0.0..1.0).contains(density) => {
                Err(invalid("env.density", "must lie in [0, 1)"))
            }
            EnvSpec::Ascii { map, .. } if map.trim().is_empty() => {
                Err(invalid("env.map", "must not be empty"))
            }
            _ => Ok(()),
        }
    }
}

/// A list of schedules to compare, read from its own TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleGrid {
    pub schedule: Vec<AlphaSchedule>,
}

impl ScheduleGrid {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let grid: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if grid.schedule.is_empty() {
            return Err(invalid("schedule", "grid must list at least one schedule"));
        }
        for (i, s) in grid.schedule.iter().enumerate() {
            s.validate()
                .map_err(|e| invalid(&format!("schedule[{i}]"), e.to_string()))?;
        }
        Ok(grid)
    }
}
