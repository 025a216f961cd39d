//! Execution loops that interleave bounded search with acting in the
//! environment, plus the repetition runners and alpha schedules.

mod large;
mod qlearning;
mod runner;
mod schedule;
mod tabular;

pub use large::{q_update, v_training_set, v_update, LargeAgent, LargeConfig, Transition};
pub use qlearning::QLearningAgent;
pub use runner::{
    run_repetition, run_repetition_with, run_task, run_task_with, DiscrepancyEvent,
    RepetitionRecord, TaskOptions,
};
pub use schedule::{AlphaSchedule, ScheduleError};
pub use tabular::{AgentKind, TabularAgent};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::ApproxError;
use crate::problem::{ActionId, Environment, StateId};
use crate::search::SearchError;

/// Which planner produced the executed action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Cmax,
    Cmaxpp,
    Qlearning,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// Everything that happened in one environment step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub state: StateId,
    pub action: ActionId,
    pub predicted: StateId,
    pub next: StateId,
    pub discrepancy: bool,
    pub branch: Branch,
    pub cost: f64,
    /// `V(s_t)` after this step's updates.
    pub value: f64,
    /// `Ṽ(s_t)` after this step's updates, when the agent keeps one.
    pub penalized_value: Option<f64>,
    /// Batch written into `V`.
    #[serde(skip)]
    pub value_updates: Vec<(StateId, f64)>,
    /// New `Q(s_t, a_t)` when the step refreshed it.
    pub q_write: Option<f64>,
}

pub trait Agent<E: Environment + ?Sized> {
    /// Plans from `s`, executes one action in `env` and learns from the
    /// outcome. `alpha` only matters to agents that switch between planners.
    fn step(&mut self, env: &E, s: StateId, alpha: f64) -> Result<StepRecord, AgentError>;
}

impl<E: Environment + ?Sized, A: Agent<E> + ?Sized> Agent<E> for Box<A> {
    fn step(&mut self, env: &E, s: StateId, alpha: f64) -> Result<StepRecord, AgentError> {
        (**self).step(env, s, alpha)
    }
}
